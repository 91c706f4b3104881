use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{chi_squared_sf, StatsError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable {
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
    pub n: u64,
}

impl ContingencyTable {
    pub fn new(row_labels: Vec<String>, col_labels: Vec<String>, counts: Vec<Vec<u64>>) -> Self {
        let n = counts.iter().flatten().sum();
        Self {
            row_labels,
            col_labels,
            counts,
            n,
        }
    }

    /// Cross-tabulates two label vectors. Rows and columns cover only the
    /// labels that occur, in ascending order.
    pub fn cross_tab(rows: &[usize], cols: &[usize]) -> Result<Self, StatsError> {
        if rows.len() != cols.len() {
            return Err(StatsError::LengthMismatch(rows.len(), cols.len()));
        }
        let index = |labels: &[usize]| -> BTreeMap<usize, usize> {
            let mut m: BTreeMap<usize, usize> = labels.iter().map(|&l| (l, 0)).collect();
            for (i, v) in m.values_mut().enumerate() {
                *v = i;
            }
            m
        };
        let (ri, ci) = (index(rows), index(cols));
        let mut counts = vec![vec![0u64; ci.len()]; ri.len()];
        for (r, c) in rows.iter().zip(cols) {
            counts[ri[r]][ci[c]] += 1;
        }
        Ok(Self::new(
            ri.keys().map(ToString::to_string).collect(),
            ci.keys().map(ToString::to_string).collect(),
            counts,
        ))
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.counts.len(), self.counts.first().map_or(0, Vec::len))
    }
}

/// Which standardized residual is reported per cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualVariant {
    /// (O − E) / √E
    #[default]
    Pearson,
    /// Haberman: (O − E) / √(E (1 − rowᵢ/n)(1 − colⱼ/n))
    Adjusted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationResult {
    pub chi2: f64,
    pub df: u64,
    pub p_value: f64,
    pub cramers_v: f64,
    pub expected: Vec<Vec<f64>>,
    pub residuals: Vec<Vec<f64>>,
    pub residual_variant: ResidualVariant,
    /// Set when any expected count is below 5.
    pub low_expected_count: bool,
}

/// Pearson chi-squared test of independence with Cramér's V and per-cell
/// standardized residuals.
pub fn chi_squared_independence(
    t: &ContingencyTable,
    variant: ResidualVariant,
) -> Result<AssociationResult, StatsError> {
    let (r, c) = t.shape();
    if r < 2 || c < 2 || t.counts.iter().any(|row| row.len() != c) {
        return Err(StatsError::TableShape(r, c));
    }
    let row_sums: Vec<f64> = t.counts.iter().map(|row| row.iter().sum::<u64>() as f64).collect();
    let col_sums: Vec<f64> = (0..c)
        .map(|j| t.counts.iter().map(|row| row[j]).sum::<u64>() as f64)
        .collect();
    if let Some(i) = row_sums.iter().position(|&s| s == 0.0) {
        return Err(StatsError::ZeroRow(i));
    }
    if let Some(j) = col_sums.iter().position(|&s| s == 0.0) {
        return Err(StatsError::ZeroColumn(j));
    }
    let n: f64 = row_sums.iter().sum();

    let mut chi2 = 0.0;
    let mut expected = vec![vec![0.0; c]; r];
    let mut residuals = vec![vec![0.0; c]; r];
    for i in 0..r {
        for j in 0..c {
            let e = row_sums[i] * col_sums[j] / n;
            let diff = t.counts[i][j] as f64 - e;
            chi2 += diff * diff / e;
            expected[i][j] = e;
            residuals[i][j] = match variant {
                ResidualVariant::Pearson => diff / e.sqrt(),
                ResidualVariant::Adjusted => {
                    let v = e * (1.0 - row_sums[i] / n) * (1.0 - col_sums[j] / n);
                    diff / v.sqrt()
                }
            };
        }
    }
    let df = ((r - 1) * (c - 1)) as u64;
    let cramers_v = (chi2 / (n * (r.min(c) - 1) as f64)).sqrt().min(1.0);
    Ok(AssociationResult {
        chi2,
        df,
        p_value: chi_squared_sf(chi2, df)?,
        cramers_v,
        low_expected_count: expected.iter().flatten().any(|&e| e < 5.0),
        expected,
        residuals,
        residual_variant: variant,
    })
}
