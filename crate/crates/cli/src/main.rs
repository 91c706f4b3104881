//! `musiczones` command line: run the whole analysis from a config file, or
//! one stage at a time with JSON/CSV intermediates between stages.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use musiczones::culture::{load_mapping, CultureMapping};
use musiczones::embedding::load_embeddings;
use musiczones::ingest::{parse_chart_file, read_selections, write_selections};
use musiczones::report::{
    cluster_stage, evaluate_stage, ingest_stage, project_stage, run_pipeline, AnalysisParams, ClusterStage,
    PipelineConfig, PipelineError, ProjectStage,
};

#[derive(Parser)]
#[command(
    name = "musiczones",
    version,
    about = "Cluster countries by chart-music embeddings and compare with cultural zones"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage and write the report directory.
    Run {
        /// TOML config with [inputs] and optional [params].
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "report")]
        out_dir: PathBuf,
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Select persistent top tracks per country from a chart CSV.
    Ingest {
        #[arg(long)]
        charts: PathBuf,
        #[arg(long, default_value = "selections.csv")]
        out: PathBuf,
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Build contrastive profiles and cluster them.
    Cluster {
        #[arg(long)]
        selections: PathBuf,
        /// CEMB binary or tab-separated text embeddings.
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long, default_value = "clustering.json")]
        out: PathBuf,
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Project clustered profiles to 2-D with t-SNE.
    Project {
        #[arg(long)]
        clustering: PathBuf,
        #[arg(long, default_value = "projection.json")]
        out: PathBuf,
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Compute alignment statistics and write the report directory.
    Evaluate {
        #[arg(long)]
        clustering: PathBuf,
        #[arg(long)]
        projection: PathBuf,
        /// `country,zone` CSV; the bundled mapping is used when omitted.
        #[arg(long)]
        mapping: Option<PathBuf>,
        #[arg(long, default_value = "report")]
        out_dir: PathBuf,
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Print the bundled country-to-zone mapping as CSV.
    Zones,
}

/// Overrides applied on top of the config file (or the defaults).
#[derive(Args, Default)]
struct ParamArgs {
    /// Params are read from this file's [params] table.
    #[arg(long = "params-from", value_name = "CONFIG")]
    params_from: Option<PathBuf>,
    #[arg(long)]
    min_weeks: Option<u32>,
    #[arg(long)]
    top_n: Option<usize>,
    #[arg(long)]
    k_min: Option<usize>,
    #[arg(long)]
    k_max: Option<usize>,
    #[arg(long)]
    fixed_k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_init: Option<usize>,
    /// k_means_plus_plus or random
    #[arg(long)]
    kmeans_init: Option<String>,
    #[arg(long)]
    perplexity: Option<f64>,
    #[arg(long)]
    tsne_iterations: Option<usize>,
    /// gaussian or pca
    #[arg(long)]
    tsne_init: Option<String>,
    #[arg(long)]
    residual_threshold: Option<f64>,
    /// pearson or adjusted
    #[arg(long)]
    residual_variant: Option<String>,
    /// arithmetic, geometric or max
    #[arg(long)]
    nmi_normalizer: Option<String>,
    /// country_minus_global or global_minus_country
    #[arg(long)]
    contrastive_sign: Option<String>,
    #[arg(long)]
    include_global: bool,
}

fn choice<T: DeserializeOwned>(flag: &str, value: &str) -> Result<T> {
    serde_json::from_value(serde_json::Value::String(value.to_string()))
        .with_context(|| format!("[config] invalid value `{value}` for --{flag}"))
}

impl ParamArgs {
    fn apply(&self, mut p: AnalysisParams) -> Result<AnalysisParams> {
        if let Some(path) = &self.params_from {
            p = PipelineConfig::from_file(path)?.params;
        }
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field {
                    p.$field = v;
                }
            )*};
        }
        set!(
            min_weeks,
            top_n,
            k_min,
            k_max,
            seed,
            n_init,
            perplexity,
            tsne_iterations,
            residual_threshold
        );
        if self.fixed_k.is_some() {
            p.fixed_k = self.fixed_k;
        }
        if let Some(v) = &self.kmeans_init {
            p.kmeans_init = choice("kmeans-init", v)?;
        }
        if let Some(v) = &self.tsne_init {
            p.tsne_init = choice("tsne-init", v)?;
        }
        if let Some(v) = &self.residual_variant {
            p.residual_variant = choice("residual-variant", v)?;
        }
        if let Some(v) = &self.nmi_normalizer {
            p.nmi_normalizer = choice("nmi-normalizer", v)?;
        }
        if let Some(v) = &self.contrastive_sign {
            p.contrastive_sign = choice("contrastive-sign", v)?;
        }
        if self.include_global {
            p.include_global = true;
        }
        p.validate()?;
        Ok(p)
    }
}

/// clustering.json
#[derive(Serialize, Deserialize)]
struct ClusterFile {
    params: AnalysisParams,
    stage: ClusterStage,
}

/// projection.json
#[derive(Serialize, Deserialize)]
struct ProjectFile {
    params: AnalysisParams,
    stage: ProjectStage,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("[io] cannot open {}", path.display()))?;
    Ok(BufReader::new(f))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_reader(open(path)?).with_context(|| format!("[io] {} is not a valid stage file", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("[io] cannot write {}", path.display()))
}

/// Keeps the stage tag first and names the file the error came from.
fn tagged<E: Into<PipelineError>>(path: &Path) -> impl FnOnce(E) -> anyhow::Error + '_ {
    move |e| anyhow!("{} ({})", e.into(), path.display())
}

fn print_warnings(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            out_dir,
            params,
        } => {
            let mut cfg = PipelineConfig::from_file(&config)?;
            cfg.params = params.apply(cfg.params)?;
            let report = run_pipeline(&cfg)?;
            print_warnings(&report.warnings);
            report.write_all(&out_dir)?;
            println!(
                "k = {}, ARI = {:.4}, NMI = {:.4}, V = {:.4}, Wilks lambda = {:.4} (p = {:.3e})",
                report.clustering.k,
                report.ari,
                report.nmi,
                report.association.cramers_v,
                report.manova.lambda,
                report.manova.p_value
            );
            println!("wrote {}", out_dir.display());
        }
        Command::Ingest { charts, out, params } => {
            let p = params.apply(AnalysisParams::default())?;
            let entries = parse_chart_file(open(&charts)?).map_err(tagged(&charts))?;
            let selections = ingest_stage(&entries, &p)?;
            for (country, picks) in &selections {
                if picks.is_empty() {
                    eprintln!("warning: {country}: no track passed the persistence filter");
                }
            }
            let f = File::create(&out).with_context(|| format!("[io] cannot write {}", out.display()))?;
            let mut w = BufWriter::new(f);
            write_selections(&selections, &mut w).map_err(tagged(&out))?;
            w.flush()?;
            let total: usize = selections.values().map(Vec::len).sum();
            println!("selected {total} tracks across {} charts", selections.len());
        }
        Command::Cluster {
            selections,
            embeddings,
            out,
            params,
        } => {
            let p = params.apply(AnalysisParams::default())?;
            let sel = read_selections(open(&selections)?).map_err(tagged(&selections))?;
            let emb = load_embeddings(open(&embeddings)?).map_err(tagged(&embeddings))?;
            let stage = cluster_stage(&sel, &emb, &p)?;
            print_warnings(&stage.warnings);
            println!(
                "k = {} (silhouette {:.4}) over {} countries",
                stage.result.k,
                stage.result.mean_silhouette,
                stage.matrix.rows()
            );
            write_json(&out, &ClusterFile { params: p, stage })?;
        }
        Command::Project {
            clustering,
            out,
            params,
        } => {
            let file: ClusterFile = read_json(&clustering)?;
            let p = params.apply(file.params)?;
            let stage = project_stage(&file.stage, &p)?;
            print_warnings(&stage.warnings);
            println!(
                "KL divergence {:.4} -> {:.4}",
                stage.projection.initial_kl, stage.projection.final_kl
            );
            write_json(&out, &ProjectFile { params: p, stage })?;
        }
        Command::Evaluate {
            clustering,
            projection,
            mapping,
            out_dir,
            params,
        } => {
            let cl: ClusterFile = read_json(&clustering)?;
            let pr: ProjectFile = read_json(&projection)?;
            if cl.stage.matrix.countries != pr.stage.projection.countries {
                bail!(
                    "[evaluate] {} and {} cover different countries",
                    clustering.display(),
                    projection.display()
                );
            }
            let p = params.apply(pr.params)?;
            let mapping = match &mapping {
                Some(path) => load_mapping(open(path)?).map_err(tagged(path))?,
                None => CultureMapping::bundled(),
            };
            let report = evaluate_stage(&cl.stage, &pr.stage, &mapping, &p, &Default::default())?;
            print_warnings(&report.warnings);
            report.write_all(&out_dir)?;
            println!(
                "ARI = {:.4}, NMI = {:.4}, V = {:.4}",
                report.ari, report.nmi, report.association.cramers_v
            );
        }
        Command::Zones => {
            let stdout = std::io::stdout();
            CultureMapping::bundled()
                .write(stdout.lock())
                .map_err(PipelineError::from)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
