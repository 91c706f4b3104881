use serde::{Deserialize, Serialize};

use super::{chi_squared_sf, StatsError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManovaResult {
    /// Wilks' Λ = det(W) / det(W + B).
    pub lambda: f64,
    /// Bartlett's chi-squared approximation.
    pub statistic: f64,
    pub df: u64,
    pub p_value: f64,
}

fn determinant(mut a: Vec<Vec<f64>>) -> f64 {
    let n = a.len();
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[pivot][col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            a.swap(pivot, col);
            det = -det;
        }
        det *= a[col][col];
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for c in col..n {
                a[row][c] -= f * a[col][c];
            }
        }
    }
    det
}

fn scatter(points: &[&[f64]], center: &[f64], acc: &mut [Vec<f64>]) {
    for x in points {
        for i in 0..center.len() {
            let di = x[i] - center[i];
            for j in 0..center.len() {
                acc[i][j] += di * (x[j] - center[j]);
            }
        }
    }
}

fn mean(points: &[&[f64]], p: usize) -> Vec<f64> {
    let mut m = vec![0.0; p];
    for x in points {
        m.iter_mut().zip(x.iter()).for_each(|(s, v)| *s += v);
    }
    m.iter_mut().for_each(|s| *s /= points.len() as f64);
    m
}

/// One-way MANOVA via Wilks' Lambda with Bartlett's approximation
/// χ² = −(n − 1 − (p + g)/2) ln Λ on p(g − 1) degrees of freedom.
///
/// `groups` may use any label values; a group with one member contributes no
/// within-group scatter.
pub fn wilks_manova(coords: &[Vec<f64>], groups: &[usize]) -> Result<ManovaResult, StatsError> {
    let n = coords.len();
    if n != groups.len() {
        return Err(StatsError::LengthMismatch(n, groups.len()));
    }
    let p = coords.first().map_or(0, Vec::len);
    if p == 0 {
        return Err(StatsError::TooFewObservations { need: 1, got: 0 });
    }
    if let Some((i, x)) = coords.iter().enumerate().find(|(_, x)| x.len() != p) {
        return Err(StatsError::Ragged(i, x.len(), p));
    }

    let mut labels: Vec<usize> = groups.to_vec();
    labels.sort_unstable();
    labels.dedup();
    let g = labels.len();
    if g < 2 {
        return Err(StatsError::TooFewGroups(g));
    }
    if n <= g {
        return Err(StatsError::TooFewObservations { need: g + 1, got: n });
    }

    let all: Vec<&[f64]> = coords.iter().map(Vec::as_slice).collect();
    let mut total = vec![vec![0.0; p]; p];
    scatter(&all, &mean(&all, p), &mut total);

    let mut within = vec![vec![0.0; p]; p];
    for label in &labels {
        let members: Vec<&[f64]> = coords
            .iter()
            .zip(groups)
            .filter(|(_, g)| *g == label)
            .map(|(x, _)| x.as_slice())
            .collect();
        scatter(&members, &mean(&members, p), &mut within);
    }

    let det_total = determinant(total.clone());
    let scale: f64 = (0..p).map(|i| total[i][i]).product();
    if !(det_total > scale * 1e-14) {
        return Err(StatsError::SingularScatter);
    }
    let lambda = (determinant(within) / det_total).clamp(0.0, 1.0);

    let df = (p * (g - 1)) as u64;
    let factor = n as f64 - 1.0 - (p + g) as f64 / 2.0;
    let statistic = (-factor * lambda.max(f64::MIN_POSITIVE).ln()).max(0.0);
    let p_value = chi_squared_sf(statistic, df)?;
    Ok(ManovaResult {
        lambda,
        statistic,
        df,
        p_value,
    })
}
