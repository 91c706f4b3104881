use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::BufReader;

use serde::{Deserialize, Serialize};

use crate::clustering::{kmeans, select_k, ClusteringResult};
use crate::culture::{load_mapping, zone_labels, CultureMapping, CultureZone};
use crate::embedding::{
    contrastive_matrix, country_profile, load_embeddings, standardize, ContrastiveMatrix, EmbeddingRecord,
    EMBEDDING_DIM,
};
use crate::ingest::{parse_chart_file, select_tracks, ChartEntry, TrackSelection, GLOBAL};
use crate::projection::{tsne, ProjectionResult};
use crate::stats::{
    adjusted_rand_index, chi_squared_independence, normalized_mutual_information, wilks_manova, ContingencyTable,
};

use super::{
    AlignmentReport, AnalysisParams, ClusteringSummary, CountryRow, FlaggedCell, InputPaths, KSummary, PipelineConfig,
    PipelineError, ProjectionSummary, SelectionSummary, REPORT_SCHEMA_VERSION,
};

pub struct PipelineInputs {
    pub charts: Vec<ChartEntry>,
    pub embeddings: Vec<EmbeddingRecord>,
    pub mapping: CultureMapping,
}

fn open(path: &std::path::Path) -> Result<BufReader<File>, PipelineError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| PipelineError::io(path, e))
}

pub fn load_inputs(paths: &InputPaths) -> Result<PipelineInputs, PipelineError> {
    let charts = parse_chart_file(open(&paths.charts)?)?;
    let embeddings = load_embeddings(open(&paths.embeddings)?)?;
    let mapping = match &paths.mapping {
        Some(p) => load_mapping(open(p)?)?,
        None => CultureMapping::bundled(),
    };
    Ok(PipelineInputs {
        charts,
        embeddings,
        mapping,
    })
}

pub fn ingest_stage(
    charts: &[ChartEntry],
    params: &AnalysisParams,
) -> Result<BTreeMap<String, Vec<TrackSelection>>, PipelineError> {
    Ok(select_tracks(charts, params.min_weeks, params.top_n)?)
}

/// Output of profile building, standardization and K-Means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterStage {
    pub selection: SelectionSummary,
    /// Standardized contrastive rows, in country order.
    pub matrix: ContrastiveMatrix,
    pub sweep: Vec<KSummary>,
    pub result: ClusteringResult,
    pub warnings: Vec<String>,
}

pub fn cluster_stage(
    selections: &BTreeMap<String, Vec<TrackSelection>>,
    embeddings: &[EmbeddingRecord],
    params: &AnalysisParams,
) -> Result<ClusterStage, PipelineError> {
    params.validate()?;
    let mut warnings = Vec::new();

    let mut by_key: BTreeMap<(&str, &str), &EmbeddingRecord> = BTreeMap::new();
    for r in embeddings {
        by_key.insert((r.country.as_str(), r.track_id.as_str()), r);
    }

    let mut profiles = Vec::new();
    let mut global = None;
    let mut missing = Vec::new();
    for (country, picks) in selections {
        if picks.is_empty() {
            warnings.push(format!(
                "{country}: no track passed the persistence filter; country dropped"
            ));
            continue;
        }
        let records: Vec<EmbeddingRecord> = picks
            .iter()
            .filter_map(|s| {
                by_key
                    .get(&(country.as_str(), s.track_id.as_str()))
                    .map(|r| (*r).clone())
            })
            .collect();
        if records.is_empty() {
            missing.push(country.clone());
            continue;
        }
        if records.len() < picks.len() {
            warnings.push(format!(
                "{country}: {} of {} selected tracks have no embedding",
                picks.len() - records.len(),
                picks.len()
            ));
        }
        let profile = country_profile(&records)?;
        if country == GLOBAL {
            global = Some(profile);
        } else {
            profiles.push(profile);
        }
    }
    if !missing.is_empty() {
        return Err(PipelineError::MissingEmbeddings(missing));
    }
    let global = global.ok_or(PipelineError::MissingGlobal)?;

    let mut raw = contrastive_matrix(&profiles, &global, params.contrastive_sign)?;
    if params.include_global {
        let at = raw.countries.partition_point(|c| c.as_str() < GLOBAL);
        raw.countries.insert(at, GLOBAL.to_string());
        raw.values.insert(at, vec![0.0; EMBEDDING_DIM]);
    }
    let matrix = standardize(&raw)?;
    let rows = matrix.rows();

    let kmeans_params = params.kmeans();
    let (result, sweep) = match params.fixed_k {
        Some(k) => {
            let r = kmeans(&matrix.values, k, params.seed, &kmeans_params)?;
            let summary = vec![KSummary {
                k,
                inertia: r.inertia,
                mean_silhouette: r.mean_silhouette,
            }];
            (r, summary)
        }
        None => {
            let k_max = params.k_max.min(rows.saturating_sub(1));
            if k_max < params.k_max {
                warnings.push(format!(
                    "k_max lowered from {} to {k_max} for {rows} countries",
                    params.k_max
                ));
            }
            let sel = select_k(&matrix.values, params.k_min, k_max, params.seed, &kmeans_params)?;
            let sweep = sel
                .results
                .iter()
                .map(|r| KSummary {
                    k: r.k,
                    inertia: r.inertia,
                    mean_silhouette: r.mean_silhouette,
                })
                .collect();
            (sel.selected().clone(), sweep)
        }
    };

    Ok(ClusterStage {
        selection: SelectionSummary::of(selections),
        matrix,
        sweep,
        result,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectStage {
    pub projection: ProjectionResult,
    pub iterations: usize,
    pub warnings: Vec<String>,
}

pub fn project_stage(cluster: &ClusterStage, params: &AnalysisParams) -> Result<ProjectStage, PipelineError> {
    let n = cluster.matrix.rows();
    let mut warnings = Vec::new();
    let mut perplexity = params.perplexity;
    if perplexity >= n as f64 {
        perplexity = (n as f64 - 1.0) / 3.0;
        warnings.push(format!(
            "perplexity {} is not below the {n} countries; using {perplexity}",
            params.perplexity
        ));
    }
    let projection = tsne(&cluster.matrix, &params.tsne(perplexity), params.seed)?;
    Ok(ProjectStage {
        projection,
        iterations: params.tsne_iterations,
        warnings,
    })
}

pub fn evaluate_stage(
    cluster: &ClusterStage,
    project: &ProjectStage,
    mapping: &CultureMapping,
    params: &AnalysisParams,
    cluster_labels: &BTreeMap<String, String>,
) -> Result<AlignmentReport, PipelineError> {
    let mut warnings = cluster.warnings.clone();
    warnings.extend(project.warnings.iter().cloned());

    let countries = &cluster.matrix.countries;
    let assignments = &cluster.result.assignments;
    let coords = &project.projection.coords;
    if project.projection.countries != *countries {
        return Err(PipelineError::Config(
            "projection and clustering cover different countries".into(),
        ));
    }

    // GLOBAL has no zone; it only takes part in the MANOVA.
    let zoned: Vec<usize> = (0..countries.len()).filter(|&i| countries[i] != GLOBAL).collect();
    if zoned.len() < countries.len() {
        warnings.push("GLOBAL is clustered but excluded from zone statistics".to_string());
    }
    let zoned_codes: Vec<&str> = zoned.iter().map(|&i| countries[i].as_str()).collect();
    let zones = zone_labels(mapping, &zoned_codes)?;

    let xy: Vec<Vec<f64>> = coords.iter().map(|c| c.to_vec()).collect();
    let manova = wilks_manova(&xy, assignments)?;

    let cluster_of: Vec<usize> = zoned.iter().map(|&i| assignments[i]).collect();
    let zone_idx: Vec<usize> = zones.iter().map(|z| z.index()).collect();
    let mut contingency = ContingencyTable::cross_tab(&cluster_of, &zone_idx)?;
    let present: BTreeSet<usize> = zone_idx.iter().copied().collect();
    contingency.col_labels = present
        .iter()
        .map(|&i| CultureZone::ALL[i].as_str().to_string())
        .collect();

    let association = chi_squared_independence(&contingency, params.residual_variant)?;
    if association.low_expected_count {
        warnings.push("some expected contingency counts are below 5".to_string());
    }
    let mut flagged_cells = Vec::new();
    for (i, row) in association.residuals.iter().enumerate() {
        for (j, &r) in row.iter().enumerate() {
            if r.abs() > params.residual_threshold {
                flagged_cells.push(FlaggedCell {
                    cluster: contingency.row_labels[i].clone(),
                    zone: contingency.col_labels[j].clone(),
                    residual: r,
                });
            }
        }
    }

    let ari = adjusted_rand_index(&cluster_of, &zone_idx)?;
    let nmi = normalized_mutual_information(&cluster_of, &zone_idx, params.nmi_normalizer)?;

    let mut zone_of = vec![None; countries.len()];
    for (&i, z) in zoned.iter().zip(&zones) {
        zone_of[i] = Some(*z);
    }
    let rows = countries
        .iter()
        .enumerate()
        .map(|(i, code)| CountryRow {
            code: code.clone(),
            zone: zone_of[i],
            cluster: assignments[i],
            x: coords[i][0],
            y: coords[i][1],
        })
        .collect();

    let result = &cluster.result;
    let mut cluster_sizes = vec![0usize; result.k];
    for &a in assignments {
        cluster_sizes[a] += 1;
    }

    Ok(AlignmentReport {
        schema_version: REPORT_SCHEMA_VERSION,
        params: params.clone(),
        selection: cluster.selection.clone(),
        countries: rows,
        clustering: ClusteringSummary {
            k: result.k,
            inertia: result.inertia,
            mean_silhouette: result.mean_silhouette,
            seed: result.seed,
            n_init: result.n_init,
            cluster_sizes,
            sweep: cluster.sweep.clone(),
        },
        projection: ProjectionSummary {
            perplexity: project.projection.perplexity,
            iterations: project.iterations,
            seed: project.projection.seed,
            initial_kl: project.projection.initial_kl,
            final_kl: project.projection.final_kl,
        },
        manova,
        contingency,
        association,
        flagged_cells,
        ari,
        nmi,
        nmi_normalizer: params.nmi_normalizer,
        warnings,
        cluster_labels: cluster_labels.clone(),
    })
}

/// Runs every stage on already-loaded inputs.
pub fn run_pipeline_with(
    inputs: &PipelineInputs,
    params: &AnalysisParams,
    cluster_labels: &BTreeMap<String, String>,
) -> Result<AlignmentReport, PipelineError> {
    params.validate()?;
    let selections = ingest_stage(&inputs.charts, params)?;
    let cluster = cluster_stage(&selections, &inputs.embeddings, params)?;
    let project = project_stage(&cluster, params)?;
    evaluate_stage(&cluster, &project, &inputs.mapping, params, cluster_labels)
}

/// Loads the configured inputs and runs ingest → profiles → contrastive →
/// standardize → K-Means → t-SNE → MANOVA → χ²/V/residuals → ARI/NMI.
pub fn run_pipeline(config: &PipelineConfig) -> Result<AlignmentReport, PipelineError> {
    let inputs = load_inputs(&config.inputs)?;
    run_pipeline_with(&inputs, &config.params, &config.cluster_labels)
}
