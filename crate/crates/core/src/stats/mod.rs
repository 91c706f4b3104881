//! Inferential and agreement statistics.

mod agreement;
mod association;
mod gamma;
mod manova;

pub use agreement::{adjusted_rand_index, normalized_mutual_information, NmiNormalizer};
pub use association::{chi_squared_independence, AssociationResult, ContingencyTable, ResidualVariant};
pub use gamma::{chi_squared_sf, ln_gamma, regularized_gamma_q};
pub use manova::{wilks_manova, ManovaResult};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("degrees of freedom must be at least 1, got {0}")]
    InvalidDf(u64),
    #[error("x must be a non-negative number, got {0}")]
    InvalidX(f64),
    #[error("label vectors differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {need} observations, got {got}")]
    TooFewObservations { need: usize, got: usize },
    #[error("need at least 2 groups, got {0}")]
    TooFewGroups(usize),
    #[error("observation {0} has dimension {1}, expected {2}")]
    Ragged(usize, usize, usize),
    #[error("total scatter matrix is singular")]
    SingularScatter,
    #[error("contingency table must be at least 2x2, got {0}x{1}")]
    TableShape(usize, usize),
    #[error("contingency table row {0} sums to zero")]
    ZeroRow(usize),
    #[error("contingency table column {0} sums to zero")]
    ZeroColumn(usize),
    #[error("series for the incomplete gamma function did not converge")]
    NoConvergence,
}
