//! Pipeline configuration: a TOML file with `[inputs]`, `[params]` and an
//! optional `[cluster_labels]` table. Every parameter has a default.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::clustering::{InitMethod, KMeansParams};
use crate::embedding::ContrastiveSign;
use crate::projection::{TsneInit, TsneParams};
use crate::stats::{NmiNormalizer, ResidualVariant};

use super::PipelineError;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputPaths {
    pub charts: PathBuf,
    pub embeddings: PathBuf,
    /// Falls back to the bundled WVS mapping when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mapping: Option<PathBuf>,
}

/// Every tunable of the analysis. Echoed verbatim into reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisParams {
    /// Date of week index 0, informational only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub week_epoch: Option<String>,
    pub min_weeks: u32,
    pub top_n: usize,
    pub k_min: usize,
    pub k_max: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixed_k: Option<usize>,
    pub seed: u64,
    pub n_init: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub kmeans_init: InitMethod,
    pub perplexity: f64,
    pub tsne_iterations: usize,
    pub tsne_learning_rate: f64,
    pub tsne_init: TsneInit,
    pub residual_threshold: f64,
    pub residual_variant: ResidualVariant,
    pub nmi_normalizer: NmiNormalizer,
    pub include_global: bool,
    pub contrastive_sign: ContrastiveSign,
}

impl Default for AnalysisParams {
    fn default() -> Self {
        let km = KMeansParams::default();
        let ts = TsneParams::default();
        Self {
            week_epoch: None,
            min_weeks: 20,
            top_n: 100,
            k_min: 2,
            k_max: 14,
            fixed_k: None,
            seed: 0,
            n_init: km.n_init,
            max_iter: km.max_iter,
            tol: km.tol,
            kmeans_init: km.init,
            perplexity: ts.perplexity,
            tsne_iterations: ts.iterations,
            tsne_learning_rate: ts.learning_rate,
            tsne_init: ts.init,
            residual_threshold: 2.5,
            residual_variant: ResidualVariant::Pearson,
            nmi_normalizer: NmiNormalizer::Arithmetic,
            include_global: false,
            contrastive_sign: ContrastiveSign::CountryMinusGlobal,
        }
    }
}

impl AnalysisParams {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |msg: &str| Err(PipelineError::Config(msg.to_string()));
        if self.min_weeks < 1 {
            return bad("min_weeks must be >= 1");
        }
        if self.top_n < 1 {
            return bad("top_n must be >= 1");
        }
        if self.k_min < 2 || self.k_min > self.k_max {
            return bad("need 2 <= k_min <= k_max");
        }
        if self.fixed_k == Some(0) {
            return bad("fixed_k must be >= 1");
        }
        if self.n_init < 1 || self.max_iter < 1 {
            return bad("n_init and max_iter must be >= 1");
        }
        if !(self.tol > 0.0) {
            return bad("tol must be positive");
        }
        if !(self.perplexity > 1.0) {
            return bad("perplexity must be > 1");
        }
        if self.tsne_iterations < 1 || !(self.tsne_learning_rate > 0.0) {
            return bad("tsne_iterations and tsne_learning_rate must be positive");
        }
        if !(self.residual_threshold > 0.0) {
            return bad("residual_threshold must be positive");
        }
        Ok(())
    }

    pub fn kmeans(&self) -> KMeansParams {
        KMeansParams {
            n_init: self.n_init,
            max_iter: self.max_iter,
            tol: self.tol,
            init: self.kmeans_init,
        }
    }

    pub fn tsne(&self, perplexity: f64) -> TsneParams {
        TsneParams {
            perplexity,
            iterations: self.tsne_iterations,
            learning_rate: self.tsne_learning_rate,
            init: self.tsne_init,
            ..TsneParams::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub inputs: InputPaths,
    #[serde(default)]
    pub params: AnalysisParams,
    /// Free-text description per cluster id.
    #[serde(default)]
    pub cluster_labels: BTreeMap<String, String>,
}

impl PipelineConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, PipelineError> {
        let cfg: Self = toml::from_str(s).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.params.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative input paths resolve against its directory.
    pub fn from_file(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.inputs.charts);
        resolve(&mut cfg.inputs.embeddings);
        if let Some(m) = cfg.inputs.mapping.as_mut() {
            resolve(m);
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
