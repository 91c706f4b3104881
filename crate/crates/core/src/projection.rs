//! Exact t-SNE to two dimensions.
//!
//! The O(n²) formulation is used throughout; inputs are a few dozen rows.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::sq_dist;
use crate::embedding::ContrastiveMatrix;

const MAX_BISECTION_STEPS: usize = 50;
const PERPLEXITY_TOL: f64 = 1e-5;
const MIN_GAIN: f64 = 0.01;

#[derive(Debug, Error, PartialEq)]
pub enum ProjectionError {
    #[error("need at least {need} points, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("perplexity {perplexity} must lie in (1, {max}]")]
    InvalidPerplexity { perplexity: f64, max: f64 },
    #[error("row {row}: perplexity not reached after {MAX_BISECTION_STEPS} bisection steps (closest {achieved})")]
    Unreachable { row: usize, achieved: f64 },
    #[error("distance matrix is not square, symmetric and non-negative with a zero diagonal")]
    BadDistances,
    #[error("iteration {iteration}: non-finite gradient")]
    NonFiniteGradient { iteration: usize },
    #[error("iterations must be at least 1")]
    NoIterations,
}

/// Starting layout for the optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TsneInit {
    #[default]
    Gaussian,
    Pca,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsneParams {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub early_exaggeration: f64,
    pub exaggeration_iters: usize,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    pub init: TsneInit,
}

impl Default for TsneParams {
    fn default() -> Self {
        Self {
            perplexity: 20.0,
            iterations: 1000,
            learning_rate: 200.0,
            early_exaggeration: 12.0,
            exaggeration_iters: 250,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            init: TsneInit::Gaussian,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionResult {
    pub countries: Vec<String>,
    pub coords: Vec<[f64; 2]>,
    pub final_kl: f64,
    /// KL divergence at the starting layout.
    pub initial_kl: f64,
    pub perplexity: f64,
    pub seed: u64,
}

/// Squared Euclidean distances between all rows.
pub fn pairwise_sq_dists(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.len();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let v = sq_dist(&rows[i], &rows[j]);
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    d
}

/// Perplexity 2^H (H in bits) of a probability row.
pub fn row_perplexity(p: &[f64]) -> f64 {
    let h: f64 = p.iter().filter(|&&v| v > 0.0).map(|&v| -v * v.log2()).sum();
    h.exp2()
}

/// Gaussian conditional probabilities for row `i` at bandwidth `exp(log_sigma)`.
fn conditional_row(dists: &[f64], i: usize, d_min: f64, log_sigma: f64, out: &mut [f64]) {
    let inv = 0.5 * (-2.0 * log_sigma).exp();
    let mut total = 0.0;
    for (j, (o, &d)) in out.iter_mut().zip(dists).enumerate() {
        *o = if j == i { 0.0 } else { (-(d - d_min) * inv).exp() };
        total += *o;
    }
    out.iter_mut().for_each(|o| *o /= total);
}

/// Conditional affinities P(j|i) whose rows each have the target perplexity.
///
/// Each row's Gaussian bandwidth is found by bisection over log σ. A row whose
/// off-diagonal distances are all equal is uniform at every bandwidth and is
/// returned as such.
pub fn calibrate_affinities(sq_dists: &[Vec<f64>], perplexity: f64) -> Result<Vec<Vec<f64>>, ProjectionError> {
    let n = sq_dists.len();
    if n < 3 {
        return Err(ProjectionError::TooFewPoints { need: 3, got: n });
    }
    let max = (n - 1) as f64;
    if !(perplexity > 1.0 && perplexity <= max) {
        return Err(ProjectionError::InvalidPerplexity { perplexity, max });
    }
    for i in 0..n {
        if sq_dists[i].len() != n || sq_dists[i][i] != 0.0 {
            return Err(ProjectionError::BadDistances);
        }
        for j in 0..n {
            let d = sq_dists[i][j];
            if !(d >= 0.0) || !d.is_finite() || d != sq_dists[j][i] {
                return Err(ProjectionError::BadDistances);
            }
        }
    }

    let mut p = vec![vec![0.0; n]; n];
    for i in 0..n {
        let others = || (0..n).filter(move |&j| j != i).map(|j| sq_dists[i][j]);
        let d_min = others().fold(f64::INFINITY, f64::min);
        let d_max = others().fold(0.0, f64::max);
        let span = d_max - d_min;
        if span == 0.0 {
            for j in 0..n {
                p[i][j] = if i == j { 0.0 } else { 1.0 / max };
            }
            continue;
        }
        let center = 0.5 * span.ln();
        let (mut lo, mut hi) = (center - 25.0, center + 25.0);
        let mut log_sigma = center;
        let mut best = (f64::INFINITY, 0.0);
        let mut reached = false;
        for _ in 0..MAX_BISECTION_STEPS {
            conditional_row(&sq_dists[i], i, d_min, log_sigma, &mut p[i]);
            let perp = row_perplexity(&p[i]);
            if (perp - perplexity).abs() < best.0 {
                best = ((perp - perplexity).abs(), perp);
            }
            if (perp - perplexity).abs() < PERPLEXITY_TOL {
                reached = true;
                break;
            }
            if perp > perplexity {
                hi = log_sigma;
            } else {
                lo = log_sigma;
            }
            log_sigma = 0.5 * (lo + hi);
        }
        if !reached {
            return Err(ProjectionError::Unreachable {
                row: i,
                achieved: best.1,
            });
        }
    }
    Ok(p)
}

/// Symmetrized joint affinities p_ij = (P(j|i) + P(i|j)) / 2n.
pub fn joint_probabilities(conditional: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = conditional.len();
    let mut p = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            p[i][j] = (conditional[i][j] + conditional[j][i]) / (2.0 * n as f64);
        }
    }
    p
}

/// Student-t (one degree of freedom) joint distribution over layout pairs,
/// together with the unnormalized kernel values.
pub fn low_dim_affinities(coords: &[[f64; 2]]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let n = coords.len();
    let mut num = vec![vec![0.0; n]; n];
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let dx = coords[i][0] - coords[j][0];
            let dy = coords[i][1] - coords[j][1];
            let v = 1.0 / (1.0 + dx * dx + dy * dy);
            num[i][j] = v;
            num[j][i] = v;
            total += 2.0 * v;
        }
    }
    let q = num.iter().map(|row| row.iter().map(|v| v / total).collect()).collect();
    (q, num)
}

/// KL(P ‖ Q) in nats over pairs with p_ij > 0.
pub fn kl_divergence(p: &[Vec<f64>], coords: &[[f64; 2]]) -> f64 {
    let (q, _) = low_dim_affinities(coords);
    let mut kl = 0.0;
    for (pr, qr) in p.iter().zip(&q) {
        for (&pij, &qij) in pr.iter().zip(qr) {
            if pij > 0.0 {
                kl += pij * (pij / qij.max(f64::MIN_POSITIVE)).ln();
            }
        }
    }
    kl.max(0.0)
}

fn gaussian_init(n: usize, seed: u64) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1e-4).expect("valid std");
    (0..n)
        .map(|_| [normal.sample(&mut rng), normal.sample(&mut rng)])
        .collect()
}

/// First two principal-component scores, scaled so the first has standard
/// deviation 1e-4. Signs are fixed so the largest-magnitude score is positive.
fn pca_init(rows: &[Vec<f64>]) -> Vec<[f64; 2]> {
    let n = rows.len();
    let dim = rows[0].len();
    let mean: Vec<f64> = (0..dim)
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let centered: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| r.iter().zip(&mean).map(|(x, m)| x - m).collect())
        .collect();
    let mut gram = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let v: f64 = centered[i].iter().zip(&centered[j]).map(|(a, b)| a * b).sum();
            gram[i][j] = v;
            gram[j][i] = v;
        }
    }

    let mut scores = vec![[0.0; 2]; n];
    for comp in 0..2 {
        let mut v: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 * 0.618_033_988_75).fract()).collect();
        let mut eig = 0.0;
        for _ in 0..1000 {
            let mut w: Vec<f64> = gram
                .iter()
                .map(|row| row.iter().zip(&v).map(|(a, b)| a * b).sum())
                .collect();
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                break;
            }
            w.iter_mut().for_each(|x| *x /= norm);
            let diff: f64 = w.iter().zip(&v).map(|(a, b)| (a - b).abs()).sum();
            v = w;
            eig = norm;
            if diff < 1e-13 {
                break;
            }
        }
        let pivot = v
            .iter()
            .copied()
            .fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if pivot < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        for i in 0..n {
            scores[i][comp] = v[i] * eig.sqrt();
        }
        // deflate
        for i in 0..n {
            for j in 0..n {
                gram[i][j] -= eig * v[i] * v[j];
            }
        }
    }
    let first_std = (scores.iter().map(|s| s[0] * s[0]).sum::<f64>() / n as f64).sqrt();
    let scale = if first_std > 0.0 { 1e-4 / first_std } else { 1.0 };
    scores.iter().map(|s| [s[0] * scale, s[1] * scale]).collect()
}

/// Runs t-SNE on raw rows, returning (coordinates, final KL, initial KL).
pub fn tsne_rows(
    rows: &[Vec<f64>],
    params: &TsneParams,
    seed: u64,
) -> Result<(Vec<[f64; 2]>, f64, f64), ProjectionError> {
    let n = rows.len();
    if n < 5 {
        return Err(ProjectionError::TooFewPoints { need: 5, got: n });
    }
    if params.iterations < 1 {
        return Err(ProjectionError::NoIterations);
    }
    let p = joint_probabilities(&calibrate_affinities(&pairwise_sq_dists(rows), params.perplexity)?);

    let mut y = match params.init {
        TsneInit::Gaussian => gaussian_init(n, seed),
        TsneInit::Pca => pca_init(rows),
    };
    let initial_kl = kl_divergence(&p, &y);

    let mut velocity = vec![[0.0; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    let mut grad = vec![[0.0; 2]; n];
    for iter in 0..params.iterations {
        let early = iter < params.exaggeration_iters;
        let exaggeration = if early { params.early_exaggeration } else { 1.0 };
        let momentum = if early {
            params.initial_momentum
        } else {
            params.final_momentum
        };

        let (q, num) = low_dim_affinities(&y);
        for i in 0..n {
            let mut g = [0.0; 2];
            for j in 0..n {
                if i == j {
                    continue;
                }
                let coef = (exaggeration * p[i][j] - q[i][j]) * num[i][j];
                g[0] += coef * (y[i][0] - y[j][0]);
                g[1] += coef * (y[i][1] - y[j][1]);
            }
            grad[i] = [4.0 * g[0], 4.0 * g[1]];
            if !grad[i][0].is_finite() || !grad[i][1].is_finite() {
                return Err(ProjectionError::NonFiniteGradient { iteration: iter });
            }
        }

        for i in 0..n {
            for d in 0..2 {
                gains[i][d] = if (grad[i][d] > 0.0) != (velocity[i][d] > 0.0) {
                    gains[i][d] + 0.2
                } else {
                    gains[i][d] * 0.8
                };
                gains[i][d] = gains[i][d].max(MIN_GAIN);
                velocity[i][d] = momentum * velocity[i][d] - params.learning_rate * gains[i][d] * grad[i][d];
                y[i][d] += velocity[i][d];
            }
        }
        for d in 0..2 {
            let mean = y.iter().map(|p| p[d]).sum::<f64>() / n as f64;
            y.iter_mut().for_each(|p| p[d] -= mean);
        }
    }
    let final_kl = kl_divergence(&p, &y);
    Ok((y, final_kl, initial_kl))
}

/// t-SNE of a standardized contrastive matrix.
pub fn tsne(m: &ContrastiveMatrix, params: &TsneParams, seed: u64) -> Result<ProjectionResult, ProjectionError> {
    let (coords, final_kl, initial_kl) = tsne_rows(&m.values, params, seed)?;
    Ok(ProjectionResult {
        countries: m.countries.clone(),
        coords,
        final_kl,
        initial_kl,
        perplexity: params.perplexity,
        seed,
    })
}
