//! Starting responsibilities for EM.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::em::Responsibilities;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub const DEFAULT_KMEANS_RESTARTS: usize = 10;
const LLOYD_MAX_ITER: usize = 300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitKind {
    KMeans,
    RandomPartition,
    RandomResponsibilities,
    /// Caller supplies the starting responsibilities.
    Given,
}

impl InitKind {
    pub fn as_str(self) -> &'static str {
        match self {
            InitKind::KMeans => "kmeans",
            InitKind::RandomPartition => "random-partition",
            InitKind::RandomResponsibilities => "random-resp",
            InitKind::Given => "given",
        }
    }
}

impl std::str::FromStr for InitKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "kmeans" | "k-means" => Ok(InitKind::KMeans),
            "random-partition" | "random" => Ok(InitKind::RandomPartition),
            "random-resp" | "random-responsibilities" => Ok(InitKind::RandomResponsibilities),
            "given" => Ok(InitKind::Given),
            other => Err(Error::Config(format!("unknown init kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitSpec {
    pub kind: InitKind,
    pub seed: u64,
    pub restarts: usize,
}

impl InitSpec {
    pub fn new(kind: InitKind, seed: u64, restarts: usize) -> Result<Self> {
        if restarts < 1 {
            return Err(Error::Config("k-means restarts must be >= 1".into()));
        }
        Ok(Self { kind, seed, restarts })
    }

    pub fn kmeans(seed: u64) -> Self {
        Self { kind: InitKind::KMeans, seed, restarts: DEFAULT_KMEANS_RESTARTS }
    }

    /// Builds starting responsibilities for `groups` components. `Given` has
    /// nothing to build and is rejected.
    pub fn build(&self, data: &Matrix, groups: usize) -> Result<Responsibilities> {
        match self.kind {
            InitKind::KMeans => kmeans_init(data, groups, self.seed, self.restarts),
            InitKind::RandomPartition | InitKind::RandomResponsibilities => {
                random_init(data.rows(), groups, self.seed, self.kind)
            }
            InitKind::Given => Err(Error::Config("given initialization has no generator".into())),
        }
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(x: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, c) in centers.iter().enumerate() {
        let d = sq_dist(x, c);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

fn distinct_rows(data: &Matrix, cap: usize) -> usize {
    let mut seen: Vec<&[f64]> = Vec::new();
    for row in data.row_iter() {
        if !seen.contains(&row) {
            seen.push(row);
            if seen.len() >= cap {
                break;
            }
        }
    }
    seen.len()
}

/// One Lloyd run from the given centers. Returns labels and WCSS.
fn lloyd(data: &Matrix, mut centers: Vec<Vec<f64>>) -> (Vec<usize>, f64) {
    let (n, p) = (data.rows(), data.cols());
    let k = centers.len();
    let mut labels = vec![usize::MAX; n];
    for _ in 0..LLOYD_MAX_ITER {
        let mut changed = false;
        for (i, row) in data.row_iter().enumerate() {
            let (c, _) = nearest(row, &centers);
            if labels[i] != c {
                labels[i] = c;
                changed = true;
            }
        }
        let mut sums = vec![vec![0.0; p]; k];
        let mut counts = vec![0usize; k];
        for (i, row) in data.row_iter().enumerate() {
            counts[labels[i]] += 1;
            for (s, x) in sums[labels[i]].iter_mut().zip(row) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // steal the point farthest from its own center
                let far = (0..n)
                    .filter(|&i| counts[labels[i]] > 1)
                    .max_by(|&a, &b| {
                        let da = sq_dist(data.row(a), &centers[labels[a]]);
                        let db = sq_dist(data.row(b), &centers[labels[b]]);
                        da.total_cmp(&db).then(b.cmp(&a))
                    })
                    .expect("n >= k guarantees a donor cluster");
                let old = labels[far];
                counts[old] -= 1;
                for (s, x) in sums[old].iter_mut().zip(data.row(far)) {
                    *s -= x;
                }
                labels[far] = c;
                counts[c] = 1;
                sums[c] = data.row(far).to_vec();
                changed = true;
            }
        }
        for c in 0..k {
            centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
        }
        if !changed {
            break;
        }
    }
    let wcss = data.row_iter().zip(&labels).map(|(row, &l)| sq_dist(row, &centers[l])).sum();
    (labels, wcss)
}

/// Best-of-`restarts` Lloyd k-means as hard responsibilities.
pub fn kmeans_init(data: &Matrix, groups: usize, seed: u64, restarts: usize) -> Result<Responsibilities> {
    let labels = kmeans_labels(data, groups, seed, restarts)?;
    Responsibilities::from_labels(&labels, groups)
}

pub fn kmeans_labels(data: &Matrix, groups: usize, seed: u64, restarts: usize) -> Result<Vec<usize>> {
    let n = data.rows();
    if groups == 0 || restarts == 0 {
        return Err(Error::Config("k-means needs groups >= 1 and restarts >= 1".into()));
    }
    if n < groups {
        return Err(Error::TooFewObservations { n, needed: groups });
    }
    let distinct = distinct_rows(data, groups);
    if distinct < groups {
        return Err(Error::TooFewDistinctPoints { distinct, groups });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(Vec<usize>, f64)> = None;
    for _ in 0..restarts {
        // distinct starting points so no center starts as a duplicate
        let mut centers: Vec<Vec<f64>> = Vec::with_capacity(groups);
        for i in sample(&mut rng, n, n).into_iter() {
            let row = data.row(i);
            if !centers.iter().any(|c| c.as_slice() == row) {
                centers.push(row.to_vec());
                if centers.len() == groups {
                    break;
                }
            }
        }
        let (labels, wcss) = lloyd(data, centers);
        if best.as_ref().is_none_or(|b| wcss < b.1) {
            best = Some((labels, wcss));
        }
    }
    Ok(canonical_labels(&best.expect("restarts >= 1").0))
}

/// Relabels so that labels appear in order of first occurrence.
fn canonical_labels(labels: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    labels
        .iter()
        .map(|&l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect()
}

/// Random starting responsibilities.
pub fn random_init(n: usize, groups: usize, seed: u64, kind: InitKind) -> Result<Responsibilities> {
    if groups == 0 || n < groups {
        return Err(Error::TooFewObservations { n, needed: groups.max(1) });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match kind {
        InitKind::RandomPartition => loop {
            let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..groups)).collect();
            let mut seen = vec![false; groups];
            labels.iter().for_each(|&l| seen[l] = true);
            if seen.iter().all(|&s| s) {
                return Responsibilities::from_labels(&labels, groups);
            }
        },
        InitKind::RandomResponsibilities => {
            let mut z = Matrix::zeros(n, groups);
            for i in 0..n {
                let row = z.row_mut(i);
                let mut total = 0.0;
                for v in row.iter_mut() {
                    let e: f64 = Exp1.sample(&mut rng);
                    *v = e;
                    total += e;
                }
                row.iter_mut().for_each(|v| *v /= total);
            }
            Responsibilities::new(z)
        }
        other => Err(Error::Config(format!("{} is not a random init kind", other.as_str()))),
    }
}
