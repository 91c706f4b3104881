//! Country-level music profiles from chart data and track embeddings, and
//! statistics for how well clusters of those profiles line up with World
//! Values Survey cultural zones.
//!
//! The pipeline runs in stages:
//!
//! ```text
//! charts CSV ─ ingest ─▶ selections ─┐
//! embeddings (CEMB) ─────────────────┴▶ profiles ─▶ contrastive ─▶ z-score
//!     ─▶ K-Means (silhouette k) ─▶ t-SNE ─▶ MANOVA, χ², Cramér's V, ARI, NMI
//! ```
//!
//! [`report::run_pipeline`] runs all of it from a [`report::PipelineConfig`].

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod clustering;
pub mod culture;
pub mod embedding;
pub mod ingest;
pub mod projection;
pub mod report;
pub mod stats;

pub use clustering::{kmeans, select_k, silhouette, ClusteringResult, KMeansParams};
pub use culture::{CultureMapping, CultureZone};
pub use embedding::{ContrastiveMatrix, CountryProfile, EmbeddingRecord, EMBEDDING_DIM};
pub use ingest::{ChartEntry, TrackSelection, GLOBAL};
pub use projection::{tsne, ProjectionResult, TsneParams};
pub use report::{run_pipeline, AlignmentReport, PipelineConfig, PipelineError};
