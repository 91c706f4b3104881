//! End-to-end orchestration, the alignment report and its figures.

mod config;
mod pipeline;
mod svg;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::culture::{CultureError, CultureZone};
use crate::embedding::EmbeddingError;
use crate::ingest::IngestError;
use crate::projection::ProjectionError;
use crate::stats::{AssociationResult, ContingencyTable, ManovaResult, NmiNormalizer, StatsError};
use crate::{clustering::ClusterError, ingest::TrackSelection};

pub use config::{AnalysisParams, InputPaths, PipelineConfig};
pub use pipeline::{
    cluster_stage, evaluate_stage, ingest_stage, load_inputs, project_stage, run_pipeline, run_pipeline_with,
    ClusterStage, PipelineInputs, ProjectStage,
};
pub use svg::{emit_residual_heatmap_svg, emit_scatter_svg, render_residual_heatmap, render_scatter, ScatterPoint};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("[ingest] {0}")]
    Ingest(#[from] IngestError),
    #[error("[embeddings] {0}")]
    Embedding(#[from] EmbeddingError),
    #[error("[embeddings] no embeddings for charted countries: {}", .0.join(", "))]
    MissingEmbeddings(Vec<String>),
    #[error("[embeddings] no GLOBAL chart selections to use as the reference profile")]
    MissingGlobal,
    #[error("[cluster] {0}")]
    Cluster(#[from] ClusterError),
    #[error("[project] {0}")]
    Projection(#[from] ProjectionError),
    #[error("[evaluate] {0}")]
    Stats(#[from] StatsError),
    #[error("[evaluate] {0}")]
    Culture(#[from] CultureError),
    #[error("[config] {0}")]
    Config(String),
    #[error("[io] {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("[io] {0}")]
    Json(#[from] serde_json::Error),
}

impl PipelineError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        PipelineError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Name of the pipeline stage the error came from.
    pub fn stage(&self) -> &'static str {
        match self {
            PipelineError::Ingest(_) => "ingest",
            PipelineError::Embedding(_) | PipelineError::MissingEmbeddings(_) | PipelineError::MissingGlobal => {
                "embeddings"
            }
            PipelineError::Cluster(_) => "cluster",
            PipelineError::Projection(_) => "project",
            PipelineError::Stats(_) | PipelineError::Culture(_) => "evaluate",
            PipelineError::Config(_) => "config",
            PipelineError::Io { .. } | PipelineError::Json(_) => "io",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountryRow {
    pub code: String,
    /// Absent for GLOBAL when it is clustered.
    pub zone: Option<CultureZone>,
    pub cluster: usize,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSummary {
    pub k: usize,
    pub inertia: f64,
    pub mean_silhouette: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringSummary {
    pub k: usize,
    pub inertia: f64,
    pub mean_silhouette: f64,
    pub seed: u64,
    pub n_init: usize,
    pub cluster_sizes: Vec<usize>,
    /// One entry per swept k (just the fixed k when one is configured).
    pub sweep: Vec<KSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionSummary {
    pub perplexity: f64,
    pub iterations: usize,
    pub seed: u64,
    pub initial_kl: f64,
    pub final_kl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionSummary {
    /// Selected (country, track) pairs, GLOBAL included.
    pub selected_tracks: usize,
    pub unique_tracks: usize,
    pub countries: usize,
}

impl SelectionSummary {
    pub fn of(selections: &BTreeMap<String, Vec<TrackSelection>>) -> Self {
        let unique: std::collections::BTreeSet<&str> =
            selections.values().flatten().map(|s| s.track_id.as_str()).collect();
        Self {
            selected_tracks: selections.values().map(Vec::len).sum(),
            unique_tracks: unique.len(),
            countries: selections.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlaggedCell {
    pub cluster: String,
    pub zone: String,
    pub residual: f64,
}

/// Everything the analysis produces, serialized as pretty JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub schema_version: u32,
    pub params: AnalysisParams,
    pub selection: SelectionSummary,
    pub countries: Vec<CountryRow>,
    pub clustering: ClusteringSummary,
    pub projection: ProjectionSummary,
    pub manova: ManovaResult,
    pub contingency: ContingencyTable,
    pub association: AssociationResult,
    /// Cells whose residual magnitude exceeds the configured threshold.
    pub flagged_cells: Vec<FlaggedCell>,
    pub ari: f64,
    pub nmi: f64,
    pub nmi_normalizer: NmiNormalizer,
    pub warnings: Vec<String>,
    pub cluster_labels: BTreeMap<String, String>,
}

impl AlignmentReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<Self, PipelineError> {
        Ok(serde_json::from_str(s)?)
    }

    /// CSV `country,x,y,cluster,zone`.
    pub fn coordinates_csv(&self) -> String {
        let mut out = String::from("country,x,y,cluster,zone\n");
        for c in &self.countries {
            let zone = c.zone.map_or("", CultureZone::as_str);
            out.push_str(&format!("{},{},{},{},{}\n", c.code, c.x, c.y, c.cluster, zone));
        }
        out
    }

    /// Writes `report.json`, `coordinates.csv`, `scatter.svg` and
    /// `residuals.svg` into `dir`.
    pub fn write_all(&self, dir: &Path) -> Result<(), PipelineError> {
        std::fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
        write_file(&dir.join("report.json"), self.to_json().as_bytes())?;
        write_file(&dir.join("coordinates.csv"), self.coordinates_csv().as_bytes())?;
        emit_scatter_svg(self, &dir.join("scatter.svg"))?;
        emit_residual_heatmap_svg(self, &dir.join("residuals.svg"))?;
        Ok(())
    }
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    let mut f = std::fs::File::create(path).map_err(|e| PipelineError::io(path, e))?;
    f.write_all(bytes).map_err(|e| PipelineError::io(path, e))
}
