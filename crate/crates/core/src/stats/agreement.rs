use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::StatsError;

/// Denominator used to normalize mutual information.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NmiNormalizer {
    #[default]
    Arithmetic,
    Geometric,
    Max,
}

struct Crosstab {
    cells: BTreeMap<(usize, usize), u64>,
    a: BTreeMap<usize, u64>,
    b: BTreeMap<usize, u64>,
    n: u64,
}

fn crosstab(a: &[usize], b: &[usize]) -> Crosstab {
    let mut t = Crosstab {
        cells: BTreeMap::new(),
        a: BTreeMap::new(),
        b: BTreeMap::new(),
        n: a.len() as u64,
    };
    for (&x, &y) in a.iter().zip(b) {
        *t.cells.entry((x, y)).or_default() += 1;
        *t.a.entry(x).or_default() += 1;
        *t.b.entry(y).or_default() += 1;
    }
    t
}

fn pairs(m: u64) -> f64 {
    (m * m.saturating_sub(1)) as f64 / 2.0
}

fn same_partition(a: &[usize], b: &[usize]) -> bool {
    let t = crosstab(a, b);
    t.cells.len() == t.a.len() && t.cells.len() == t.b.len()
}

/// Adjusted Rand Index from pair counts over the contingency table.
///
/// When the maximum index equals its expectation (both partitions trivial),
/// returns 1 for identical partitions and 0 otherwise.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(StatsError::TooFewObservations { need: 2, got: a.len() });
    }
    let t = crosstab(a, b);
    let index: f64 = t.cells.values().map(|&m| pairs(m)).sum();
    let sum_a: f64 = t.a.values().map(|&m| pairs(m)).sum();
    let sum_b: f64 = t.b.values().map(|&m| pairs(m)).sum();
    let expected = sum_a * sum_b / pairs(t.n);
    let max = (sum_a + sum_b) / 2.0;
    if max == expected {
        return Ok(if same_partition(a, b) { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / (max - expected))
}

fn entropy_bits(counts: impl Iterator<Item = u64>, n: f64) -> f64 {
    counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// Mutual information (bits) divided by the chosen mean of the two entropies.
/// Returns 0 when the normalizer is 0.
pub fn normalized_mutual_information(a: &[usize], b: &[usize], normalizer: NmiNormalizer) -> Result<f64, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(StatsError::TooFewObservations { need: 1, got: 0 });
    }
    let t = crosstab(a, b);
    let n = t.n as f64;
    let ha = entropy_bits(t.a.values().copied(), n);
    let hb = entropy_bits(t.b.values().copied(), n);
    let mut mi = 0.0;
    for (&(x, y), &c) in &t.cells {
        let pxy = c as f64 / n;
        let px = t.a[&x] as f64 / n;
        let py = t.b[&y] as f64 / n;
        mi += pxy * (pxy / (px * py)).log2();
    }
    let denom = match normalizer {
        NmiNormalizer::Arithmetic => (ha + hb) / 2.0,
        NmiNormalizer::Geometric => (ha * hb).sqrt(),
        NmiNormalizer::Max => ha.max(hb),
    };
    if denom <= 0.0 {
        return Ok(0.0);
    }
    Ok((mi.max(0.0) / denom).min(1.0))
}
