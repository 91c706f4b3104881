//! K-Means with seeded restarts and silhouette-based choice of k.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ClusterError {
    #[error("k = {k} is outside [1, {rows}]")]
    InvalidK { k: usize, rows: usize },
    #[error("k range [{k_min}, {k_max}] is invalid for {rows} rows")]
    InvalidRange { k_min: usize, k_max: usize, rows: usize },
    #[error("input matrix is not standardized")]
    NotStandardized,
    #[error("n_init and max_iter must be at least 1")]
    InvalidParams,
    #[error("silhouette needs at least 2 clusters")]
    SingleCluster,
    #[error("{points} points but {labels} labels")]
    LengthMismatch { points: usize, labels: usize },
    #[error("empty input")]
    Empty,
}

/// How initial centroids are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMethod {
    /// k distinct rows sampled uniformly without replacement.
    Random,
    /// Greedy k-means++ seeding (2 + ln k candidates per step).
    #[default]
    KMeansPlusPlus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansParams {
    pub n_init: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub init: InitMethod,
}

impl Default for KMeansParams {
    fn default() -> Self {
        Self {
            n_init: 10,
            max_iter: 300,
            tol: 1e-6,
            init: InitMethod::default(),
        }
    }
}

/// One Lloyd run from one initialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartRun {
    pub inertia: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Inertia after every iteration, in order.
    pub inertia_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringResult {
    pub k: usize,
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
    /// Mean silhouette; 0 when k = 1.
    pub mean_silhouette: f64,
    pub seed: u64,
    pub n_init: usize,
    pub restarts: Vec<RestartRun>,
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn init_random(rows: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    sample(rng, rows.len(), k)
        .into_iter()
        .map(|i| rows[i].clone())
        .collect()
}

fn init_plus_plus(rows: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = rows.len();
    let trials = 2 + (k as f64).ln().floor() as usize;
    let mut centroids = vec![rows[rng.random_range(0..n)].clone()];
    let mut closest: Vec<f64> = rows.iter().map(|r| sq_dist(r, &centroids[0])).collect();

    while centroids.len() < k {
        let total: f64 = closest.iter().sum();
        let mut best: Option<(f64, usize, Vec<f64>)> = None;
        for _ in 0..trials {
            let candidate = if total > 0.0 {
                let target = rng.random::<f64>() * total;
                let mut acc = 0.0;
                let mut pick = n - 1;
                for (i, &d) in closest.iter().enumerate() {
                    acc += d;
                    if acc > target {
                        pick = i;
                        break;
                    }
                }
                pick
            } else {
                rng.random_range(0..n)
            };
            let updated: Vec<f64> = rows
                .iter()
                .zip(&closest)
                .map(|(r, &d)| d.min(sq_dist(r, &rows[candidate])))
                .collect();
            let potential: f64 = updated.iter().sum();
            if best.as_ref().is_none_or(|b| potential < b.0) {
                best = Some((potential, candidate, updated));
            }
        }
        let (_, pick, updated) = best.expect("at least one trial");
        centroids.push(rows[pick].clone());
        closest = updated;
    }
    centroids
}

fn assign(rows: &[Vec<f64>], centroids: &[Vec<f64>]) -> (Vec<usize>, Vec<f64>) {
    rows.iter().map(|r| nearest(r, centroids)).unzip()
}

fn means(rows: &[Vec<f64>], assignments: &[usize], k: usize) -> Vec<Vec<f64>> {
    let dim = rows[0].len();
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (r, &a) in rows.iter().zip(assignments) {
        counts[a] += 1;
        for (s, x) in sums[a].iter_mut().zip(r) {
            *s += x;
        }
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        s.iter_mut().for_each(|v| *v /= c as f64);
    }
    sums
}

fn inertia_of(rows: &[Vec<f64>], assignments: &[usize], centroids: &[Vec<f64>]) -> f64 {
    rows.iter()
        .zip(assignments)
        .map(|(r, &a)| sq_dist(r, &centroids[a]))
        .sum()
}

/// Gives every empty cluster the point currently farthest from its centroid,
/// drawn only from clusters that keep at least one member.
fn repair_empty(assignments: &mut [usize], dists: &mut [f64], k: usize) {
    let mut counts = vec![0usize; k];
    for &a in assignments.iter() {
        counts[a] += 1;
    }
    for empty in 0..k {
        if counts[empty] > 0 {
            continue;
        }
        let donor = (0..assignments.len())
            .filter(|&i| counts[assignments[i]] > 1)
            .max_by(|&i, &j| dists[i].total_cmp(&dists[j]).then(j.cmp(&i)))
            .expect("k <= rows leaves a donor");
        counts[assignments[donor]] -= 1;
        counts[empty] += 1;
        assignments[donor] = empty;
        dists[donor] = 0.0;
    }
}

/// Lloyd iterations from the given starting centroids.
///
/// Each iteration assigns points to the nearest centroid (repairing empty
/// clusters), moves centroids to their cluster means and records the inertia
/// of that pair. Stops when no centroid moves by `tol` or more.
pub fn lloyd(
    rows: &[Vec<f64>],
    init: Vec<Vec<f64>>,
    max_iter: usize,
    tol: f64,
) -> (Vec<usize>, Vec<Vec<f64>>, RestartRun) {
    let k = init.len();
    let mut centroids = init;
    let mut assignments = Vec::new();
    let mut trace = Vec::new();
    let mut converged = false;
    for _ in 0..max_iter {
        let (mut a, mut d) = assign(rows, &centroids);
        repair_empty(&mut a, &mut d, k);
        let updated = means(rows, &a, k);
        let shift = centroids
            .iter()
            .zip(&updated)
            .map(|(c, u)| sq_dist(c, u).sqrt())
            .fold(0.0, f64::max);
        trace.push(inertia_of(rows, &a, &updated));
        assignments = a;
        centroids = updated;
        if shift < tol {
            converged = true;
            break;
        }
    }
    let run = RestartRun {
        inertia: *trace.last().unwrap_or(&f64::INFINITY),
        iterations: trace.len(),
        converged,
        inertia_trace: trace,
    };
    (assignments, centroids, run)
}

/// Seeded K-Means with `n_init` restarts; the lowest-inertia restart wins
/// (earliest restart on ties).
pub fn kmeans(rows: &[Vec<f64>], k: usize, seed: u64, params: &KMeansParams) -> Result<ClusteringResult, ClusterError> {
    let n = rows.len();
    if k < 1 || k > n {
        return Err(ClusterError::InvalidK { k, rows: n });
    }
    if params.n_init < 1 || params.max_iter < 1 {
        return Err(ClusterError::InvalidParams);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(Vec<usize>, Vec<Vec<f64>>, f64)> = None;
    let mut restarts = Vec::with_capacity(params.n_init);
    for _ in 0..params.n_init {
        let init = match params.init {
            InitMethod::Random => init_random(rows, k, &mut rng),
            InitMethod::KMeansPlusPlus => init_plus_plus(rows, k, &mut rng),
        };
        let (a, c, run) = lloyd(rows, init, params.max_iter, params.tol);
        if best.as_ref().is_none_or(|b| run.inertia < b.2) {
            best = Some((a, c, run.inertia));
        }
        restarts.push(run);
    }
    let (assignments, centroids, inertia) = best.expect("n_init >= 1");
    let mean_silhouette = if k >= 2 { silhouette(rows, &assignments)? } else { 0.0 };
    Ok(ClusteringResult {
        k,
        assignments,
        centroids,
        inertia,
        mean_silhouette,
        seed,
        n_init: params.n_init,
        restarts,
    })
}

/// [`kmeans`] on a matrix produced by z-scoring.
pub fn kmeans_standardized(
    m: &crate::embedding::ContrastiveMatrix,
    k: usize,
    seed: u64,
    params: &KMeansParams,
) -> Result<ClusteringResult, ClusterError> {
    if !m.standardized {
        return Err(ClusterError::NotStandardized);
    }
    kmeans(&m.values, k, seed, params)
}

/// Mean silhouette coefficient with Euclidean distance. Points in singleton
/// clusters score 0.
pub fn silhouette(rows: &[Vec<f64>], assignments: &[usize]) -> Result<f64, ClusterError> {
    let n = rows.len();
    if n != assignments.len() {
        return Err(ClusterError::LengthMismatch {
            points: n,
            labels: assignments.len(),
        });
    }
    if n == 0 {
        return Err(ClusterError::Empty);
    }
    let k = assignments.iter().max().unwrap() + 1;
    let mut sizes = vec![0usize; k];
    for &a in assignments {
        sizes[a] += 1;
    }
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return Err(ClusterError::SingleCluster);
    }

    let mut total = 0.0;
    let mut dist_sums = vec![0.0; k];
    for i in 0..n {
        let own = assignments[i];
        if sizes[own] == 1 {
            continue;
        }
        dist_sums.iter_mut().for_each(|s| *s = 0.0);
        for j in 0..n {
            if i != j {
                dist_sums[assignments[j]] += sq_dist(&rows[i], &rows[j]).sqrt();
            }
        }
        let a = dist_sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own && sizes[c] > 0)
            .map(|c| dist_sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / n as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSelection {
    pub k: usize,
    /// One result per k in the swept range, ascending.
    pub results: Vec<ClusteringResult>,
}

impl KSelection {
    pub fn selected(&self) -> &ClusteringResult {
        self.results
            .iter()
            .find(|r| r.k == self.k)
            .expect("selected k is in the sweep")
    }
}

/// Sweeps k over `[k_min, k_max]` and picks the highest mean silhouette,
/// preferring the smaller k on ties.
pub fn select_k(
    rows: &[Vec<f64>],
    k_min: usize,
    k_max: usize,
    seed: u64,
    params: &KMeansParams,
) -> Result<KSelection, ClusterError> {
    let n = rows.len();
    if k_min < 1 || k_min > k_max || k_max > n {
        return Err(ClusterError::InvalidRange { k_min, k_max, rows: n });
    }
    let mut results = Vec::new();
    for k in k_min..=k_max {
        results.push(kmeans(rows, k, seed, params)?);
    }
    let mut best = &results[0];
    for r in &results[1..] {
        if r.mean_silhouette > best.mean_silhouette {
            best = r;
        }
    }
    Ok(KSelection { k: best.k, results })
}
