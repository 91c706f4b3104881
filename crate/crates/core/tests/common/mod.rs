//! Fixtures and independent oracles shared by the integration tests.
//!
//! The oracles here deliberately take different routes from the library code
//! they check (pair enumeration, explicit sums, quadrature, brute force).
#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use musiczones::embedding::{write_cemb, EmbeddingRecord, EMBEDDING_DIM};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

// --- planted blobs --------------------------------------------------------

/// Sizes used for the 62-point, 9-blob fixture.
pub const BLOB_SIZES: [usize; 9] = [7, 7, 7, 7, 7, 7, 7, 7, 6];

/// Points in `dim` dimensions around `sizes.len()` orthogonal centers.
///
/// Per-coordinate noise has std 1, so a blob's RMS radius is √dim. Centers sit
/// at `scale · e_j`, i.e. `scale · √2` apart; the default fixture uses a scale
/// that puts centers ten RMS radii apart.
pub fn planted_blobs(sizes: &[usize], dim: usize, scale: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (b, &size) in sizes.iter().enumerate() {
        for _ in 0..size {
            let mut v: Vec<f64> = (0..dim).map(|_| normal.sample(&mut rng)).collect();
            v[b] += scale;
            rows.push(v);
            labels.push(b);
        }
    }
    (rows, labels)
}

/// Center scale giving inter-center distance = 10 × RMS blob radius.
pub fn ten_radii_scale(dim: usize) -> f64 {
    10.0 * (dim as f64).sqrt() / 2f64.sqrt()
}

pub fn nine_blobs(seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    planted_blobs(&BLOB_SIZES, EMBEDDING_DIM, ten_radii_scale(EMBEDDING_DIM), seed)
}

// --- agreement oracles ----------------------------------------------------

/// ARI from O(n²) pair enumeration (pair-count form).
pub fn ari_pairs(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len();
    let (mut n11, mut n10, mut n01, mut n00) = (0f64, 0f64, 0f64, 0f64);
    for i in 0..n {
        for j in i + 1..n {
            match (a[i] == a[j], b[i] == b[j]) {
                (true, true) => n11 += 1.0,
                (true, false) => n10 += 1.0,
                (false, true) => n01 += 1.0,
                (false, false) => n00 += 1.0,
            }
        }
    }
    let denom = (n00 + n01) * (n01 + n11) + (n00 + n10) * (n10 + n11);
    if denom == 0.0 {
        return if n10 == 0.0 && n01 == 0.0 { 1.0 } else { 0.0 };
    }
    2.0 * (n00 * n11 - n01 * n10) / denom
}

/// NMI (arithmetic mean normalizer, bits) by direct summation over the joint
/// distribution of label values.
pub fn nmi_direct(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len() as f64;
    let amax = *a.iter().max().unwrap();
    let bmax = *b.iter().max().unwrap();
    let mut joint = vec![vec![0u32; bmax + 1]; amax + 1];
    for (&x, &y) in a.iter().zip(b) {
        joint[x][y] += 1;
    }
    let ca: Vec<u32> = joint.iter().map(|r| r.iter().sum()).collect();
    let cb: Vec<u32> = (0..=bmax).map(|j| joint.iter().map(|r| r[j]).sum()).collect();
    let h = |c: &[u32]| -> f64 {
        c.iter()
            .filter(|&&v| v > 0)
            .map(|&v| v as f64 / n)
            .map(|p| -p * p.log2())
            .sum()
    };
    let mut mi = 0.0;
    for x in 0..=amax {
        for y in 0..=bmax {
            if joint[x][y] > 0 {
                let p = joint[x][y] as f64 / n;
                mi += p * (p * n * n / (ca[x] as f64 * cb[y] as f64)).log2();
            }
        }
    }
    let denom = (h(&ca) + h(&cb)) / 2.0;
    if denom == 0.0 {
        0.0
    } else {
        mi / denom
    }
}

// --- chi-squared oracle ---------------------------------------------------

/// Γ(df/2) from factorials: Γ(m) = (m−1)!, Γ(m + ½) = (2m)! √π / (4^m m!).
pub fn gamma_half_integer(df: u64) -> f64 {
    if df.is_multiple_of(2) {
        (1..df / 2).map(|i| i as f64).product()
    } else {
        let m = (df - 1) / 2;
        let mut v = std::f64::consts::PI.sqrt();
        for i in 0..m {
            v *= i as f64 + 0.5;
        }
        v
    }
}

/// Chi-squared CDF by composite Simpson quadrature after substituting x = t²,
/// which removes the df = 1 singularity at the origin.
pub fn chi2_cdf_quadrature(x: f64, df: u64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let k = df as f64;
    let norm = 2f64.powf(k / 2.0) * gamma_half_integer(df);
    let f = |t: f64| 2.0 * t.powf(k - 1.0) * (-t * t / 2.0).exp() / norm;
    let upper = x.sqrt();
    let steps = 20_000;
    let h = upper / steps as f64;
    let mut s = f(0.0) + f(upper);
    for i in 1..steps {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(i as f64 * h);
    }
    s * h / 3.0
}

// --- MANOVA oracle --------------------------------------------------------

/// Wilks' Λ = det(W) / det(W + B) with W and B built separately in 2-D.
pub fn wilks_oracle(points: &[[f64; 2]], groups: &[usize]) -> f64 {
    let n = points.len() as f64;
    let grand = [
        points.iter().map(|p| p[0]).sum::<f64>() / n,
        points.iter().map(|p| p[1]).sum::<f64>() / n,
    ];
    let mut by_group: BTreeMap<usize, Vec<[f64; 2]>> = BTreeMap::new();
    for (p, &g) in points.iter().zip(groups) {
        by_group.entry(g).or_default().push(*p);
    }
    let mut w = [[0.0; 2]; 2];
    let mut b = [[0.0; 2]; 2];
    for members in by_group.values() {
        let m = members.len() as f64;
        let c = [
            members.iter().map(|p| p[0]).sum::<f64>() / m,
            members.iter().map(|p| p[1]).sum::<f64>() / m,
        ];
        for p in members {
            let d = [p[0] - c[0], p[1] - c[1]];
            for i in 0..2 {
                for j in 0..2 {
                    w[i][j] += d[i] * d[j];
                }
            }
        }
        let d = [c[0] - grand[0], c[1] - grand[1]];
        for i in 0..2 {
            for j in 0..2 {
                b[i][j] += m * d[i] * d[j];
            }
        }
    }
    let det = |m: [[f64; 2]; 2]| m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let t = [
        [w[0][0] + b[0][0], w[0][1] + b[0][1]],
        [w[1][0] + b[1][0], w[1][1] + b[1][1]],
    ];
    det(w) / det(t)
}

// --- k-means oracle -------------------------------------------------------

/// Minimum-inertia 2-partition by enumerating every 2-coloring.
pub fn brute_force_two_means(rows: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let n = rows.len();
    let mut best = (Vec::new(), f64::INFINITY);
    for mask in 1u32..(1 << n) - 1 {
        let labels: Vec<usize> = (0..n).map(|i| ((mask >> i) & 1) as usize).collect();
        let mut sse = 0.0;
        for c in 0..2 {
            let members: Vec<&Vec<f64>> = rows
                .iter()
                .zip(&labels)
                .filter(|(_, &l)| l == c)
                .map(|(r, _)| r)
                .collect();
            let dim = rows[0].len();
            let mean: Vec<f64> = (0..dim)
                .map(|d| members.iter().map(|r| r[d]).sum::<f64>() / members.len() as f64)
                .collect();
            for r in members {
                sse += r.iter().zip(&mean).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
            }
        }
        if sse < best.1 {
            best = (labels, sse);
        }
    }
    best
}

/// True when the two labelings describe the same partition.
pub fn same_partition(a: &[usize], b: &[usize]) -> bool {
    let mut map = BTreeMap::new();
    let mut back = BTreeMap::new();
    a.iter()
        .zip(b)
        .all(|(x, y)| *map.entry(x).or_insert(y) == y && *back.entry(y).or_insert(x) == x)
}

// --- silhouette oracle ----------------------------------------------------

pub fn silhouette_direct(rows: &[Vec<f64>], labels: &[usize]) -> f64 {
    let dist = |i: usize, j: usize| -> f64 {
        rows[i]
            .iter()
            .zip(&rows[j])
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    };
    let n = rows.len();
    let mut total = 0.0;
    for i in 0..n {
        let same: Vec<usize> = (0..n).filter(|&j| j != i && labels[j] == labels[i]).collect();
        if same.is_empty() {
            continue;
        }
        let a = same.iter().map(|&j| dist(i, j)).sum::<f64>() / same.len() as f64;
        let mut b = f64::INFINITY;
        let mut others: Vec<usize> = labels.iter().copied().filter(|&l| l != labels[i]).collect();
        others.sort_unstable();
        others.dedup();
        for c in others {
            let members: Vec<usize> = (0..n).filter(|&j| labels[j] == c).collect();
            b = b.min(members.iter().map(|&j| dist(i, j)).sum::<f64>() / members.len() as f64);
        }
        total += (b - a) / a.max(b);
    }
    total / n as f64
}

// --- t-SNE oracles --------------------------------------------------------

/// Conditional affinities for one row by bisection over the Gaussian
/// precision β, entropy in nats, run to machine precision.
pub fn affinity_row_oracle(sq: &[f64], i: usize, perplexity: f64) -> Vec<f64> {
    let target = perplexity.ln();
    let row = |beta: f64| -> Vec<f64> {
        let w: Vec<f64> = sq
            .iter()
            .enumerate()
            .map(|(j, &d)| if j == i { 0.0 } else { (-beta * d).exp() })
            .collect();
        let s: f64 = w.iter().sum();
        w.iter().map(|v| v / s).collect()
    };
    let entropy = |p: &[f64]| -> f64 { p.iter().filter(|&&v| v > 0.0).map(|&v| -v * v.ln()).sum() };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while entropy(&row(hi)) > target {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if entropy(&row(mid)) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    row(0.5 * (lo + hi))
}

/// Trustworthiness of a low-dimensional layout with neighborhood size k.
pub fn trustworthiness(high: &[Vec<f64>], low: &[[f64; 2]], k: usize) -> f64 {
    let n = high.len();
    let hd = |i: usize, j: usize| -> f64 { high[i].iter().zip(&high[j]).map(|(a, b)| (a - b).powi(2)).sum() };
    let ld = |i: usize, j: usize| -> f64 { (low[i][0] - low[j][0]).powi(2) + (low[i][1] - low[j][1]).powi(2) };
    let mut penalty = 0.0;
    for i in 0..n {
        let mut by_high: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        by_high.sort_by(|&a, &b| hd(i, a).total_cmp(&hd(i, b)));
        let mut rank = vec![0usize; n];
        for (r, &j) in by_high.iter().enumerate() {
            rank[j] = r + 1;
        }
        let mut by_low: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        by_low.sort_by(|&a, &b| ld(i, a).total_cmp(&ld(i, b)));
        for &j in by_low.iter().take(k) {
            if rank[j] > k {
                penalty += (rank[j] - k) as f64;
            }
        }
    }
    let (n, k) = (n as f64, k as f64);
    1.0 - 2.0 / (n * k * (2.0 * n - 3.0 * k - 1.0)) * penalty
}

// --- random helpers -------------------------------------------------------

pub fn random_labels(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..k)).collect()
}

// --- end-to-end fixture ---------------------------------------------------

/// Country → zone for the planted 12-country fixture, three per blob.
pub const PLANTED_COUNTRIES: [(&str, &str); 12] = [
    ("AR", "LatinAmerica"),
    ("CL", "LatinAmerica"),
    ("CO", "LatinAmerica"),
    ("PE", "LatinAmerica"),
    ("DE", "ProtestantEurope"),
    ("NL", "ProtestantEurope"),
    ("NO", "ProtestantEurope"),
    ("SE", "ProtestantEurope"),
    ("KE", "AfricanIslamic"),
    ("NG", "AfricanIslamic"),
    ("UG", "AfricanIslamic"),
    ("ZA", "AfricanIslamic"),
];

pub fn planted_blob_of(country: &str) -> usize {
    PLANTED_COUNTRIES.iter().position(|(c, _)| *c == country).unwrap() / 4
}

fn chart_rows(out: &mut String, country: &str, track: &str, start: u32, run: u32, views: u64) {
    for w in start..start + run {
        out.push_str(&format!("{country},{w},{track},Title {track},Artist,{views}\n"));
    }
}

/// Writes `charts.csv`, `embeddings.cemb` and `config.toml` for 12 countries in
/// three planted blobs plus a GLOBAL chart. Returns the config path.
///
/// Each country charts four persistent local tracks, one short-lived track
/// (filtered out by the 20-week rule) and a shared global hit.
pub fn write_planted_fixture(dir: &Path, extra_params: &str) -> PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let noise = Normal::new(0.0, 0.3).unwrap();
    let mut charts = String::from("country,week,track_id,title,artist,views\n");
    let mut records = Vec::new();
    let vector = |blob: Option<usize>, rng: &mut ChaCha8Rng| -> Vec<f32> {
        (0..EMBEDDING_DIM)
            .map(|d| {
                let center = match blob {
                    Some(b) if d % 3 == b => 2.0,
                    _ => 0.0,
                };
                (center + noise.sample(rng)) as f32
            })
            .collect()
    };

    let hit = vector(None, &mut rng);
    let global_tracks: Vec<(String, Vec<f32>)> = (0..5).map(|i| (format!("g{i}"), vector(None, &mut rng))).collect();
    chart_rows(&mut charts, "GLOBAL", "hit", 0, 30, 1000);
    records.push(EmbeddingRecord {
        track_id: "hit".into(),
        country: "GLOBAL".into(),
        vector: hit.clone(),
    });
    for (i, (id, v)) in global_tracks.iter().enumerate() {
        chart_rows(&mut charts, "GLOBAL", id, i as u32, 22, 500 + i as u64);
        records.push(EmbeddingRecord {
            track_id: id.clone(),
            country: "GLOBAL".into(),
            vector: v.clone(),
        });
    }

    for (country, _) in PLANTED_COUNTRIES {
        let blob = planted_blob_of(country);
        chart_rows(&mut charts, country, "hit", 0, 30, 100);
        records.push(EmbeddingRecord {
            track_id: "hit".into(),
            country: country.into(),
            vector: hit.clone(),
        });
        for t in 0..4 {
            let id = format!("{}-{t}", country.to_lowercase());
            chart_rows(&mut charts, country, &id, t, 20 + t, 10 + t as u64);
            records.push(EmbeddingRecord {
                track_id: id,
                country: country.into(),
                vector: vector(Some(blob), &mut rng),
            });
        }
        // charts for only 8 weeks: must not influence the profile
        let short = format!("{}-short", country.to_lowercase());
        chart_rows(&mut charts, country, &short, 40, 8, 1_000_000);
        let wild: Vec<f32> = (0..EMBEDDING_DIM).map(|_| rng.random_range(-50.0..50.0)).collect();
        records.push(EmbeddingRecord {
            track_id: short,
            country: country.into(),
            vector: wild,
        });
    }

    std::fs::write(dir.join("charts.csv"), charts).unwrap();
    let mut cemb = Vec::new();
    write_cemb(&records, &mut cemb).unwrap();
    std::fs::write(dir.join("embeddings.cemb"), cemb).unwrap();

    let config = format!(
        "[inputs]\ncharts = \"charts.csv\"\nembeddings = \"embeddings.cemb\"\n\n[params]\nseed = 7\n{extra_params}\n"
    );
    let path = dir.join("config.toml");
    std::fs::write(&path, config).unwrap();
    path
}

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("golden")
}

/// Compares `actual` with a golden file; `UPDATE_GOLDEN=1` rewrites it.
pub fn check_golden(name: &str, actual: &str) -> bool {
    let path = golden_dir().join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(golden_dir()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return true;
    }
    match std::fs::read_to_string(&path) {
        Ok(expected) => expected == actual,
        Err(e) => panic!("missing golden file {}: {e} (run with UPDATE_GOLDEN=1)", path.display()),
    }
}
