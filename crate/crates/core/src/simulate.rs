//! Gaussian and multivariate-t mixture generators with optional uniform
//! background noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{CovarianceStructure, OrientKind};
use crate::linalg::{cholesky, normalize_column_signs, reconstruct, Matrix, OrthMatrix, SymMatrix};

const SIM1: &str = include_str!("../sims/sim1.json");
const SIM2: &str = include_str!("../sims/sim2.json");

fn draw(rng: &mut ChaCha8Rng, mean: &[f64], l: &Matrix, scale: f64, z: &mut [f64], out: &mut [f64]) {
    for v in z.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
    for i in 0..out.len() {
        let lz: f64 = (0..=i).map(|j| l[(i, j)] * z[j]).sum();
        out[i] = mean[i] + scale * lz;
    }
}

fn check_mean(mean: &[f64], sigma: &SymMatrix) -> Result<()> {
    if mean.len() != sigma.dim() {
        return Err(Error::DimensionMismatch { expected: sigma.dim(), found: mean.len() });
    }
    Ok(())
}

fn mvn_rows(rng: &mut ChaCha8Rng, mean: &[f64], sigma: &SymMatrix, n: usize) -> Result<Matrix> {
    check_mean(mean, sigma)?;
    let chol = cholesky(sigma)?;
    let p = mean.len();
    let mut out = Matrix::zeros(n, p);
    let mut z = vec![0.0; p];
    for i in 0..n {
        draw(rng, mean, chol.factor(), 1.0, &mut z, out.row_mut(i));
    }
    Ok(out)
}

fn mvt_rows(rng: &mut ChaCha8Rng, mean: &[f64], scale: &SymMatrix, df: f64, n: usize) -> Result<Matrix> {
    check_mean(mean, scale)?;
    let chi = ChiSquared::new(df).map_err(|_| Error::Config(format!("invalid degrees of freedom {df}")))?;
    let chol = cholesky(scale)?;
    let p = mean.len();
    let mut out = Matrix::zeros(n, p);
    let mut z = vec![0.0; p];
    for i in 0..n {
        let w: f64 = chi.sample(rng);
        draw(rng, mean, chol.factor(), (df / w).sqrt(), &mut z, out.row_mut(i));
    }
    Ok(out)
}

/// `n` draws from N(mean, sigma).
pub fn sample_mvn(mean: &[f64], sigma: &SymMatrix, n: usize, seed: u64) -> Result<Matrix> {
    mvn_rows(&mut ChaCha8Rng::seed_from_u64(seed), mean, sigma, n)
}

/// `n` draws from the multivariate t with the given scale matrix.
pub fn sample_mvt(mean: &[f64], scale: &SymMatrix, df: f64, n: usize, seed: u64) -> Result<Matrix> {
    mvt_rows(&mut ChaCha8Rng::seed_from_u64(seed), mean, scale, df, n)
}

/// Data with `round(fraction · n)` uniform points appended from the bounding
/// box of the input. The flag vector marks appended rows.
pub fn add_uniform_noise(data: &Matrix, fraction: f64, seed: u64) -> Result<(Matrix, Vec<bool>)> {
    add_noise_rng(&mut ChaCha8Rng::seed_from_u64(seed), data, fraction)
}

fn add_noise_rng(rng: &mut ChaCha8Rng, data: &Matrix, fraction: f64) -> Result<(Matrix, Vec<bool>)> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::Config(format!("noise fraction {fraction} outside [0, 1)")));
    }
    let (n, p) = (data.rows(), data.cols());
    let extra = (fraction * n as f64).round() as usize;
    let mut flags = vec![false; n];
    if extra == 0 {
        return Ok((data.clone(), flags));
    }
    let mut lo = vec![f64::INFINITY; p];
    let mut hi = vec![f64::NEG_INFINITY; p];
    for row in data.row_iter() {
        for j in 0..p {
            lo[j] = lo[j].min(row[j]);
            hi[j] = hi[j].max(row[j]);
        }
    }
    let noise = Matrix::from_fn(extra, p, |_, j| if hi[j] > lo[j] { rng.random_range(lo[j]..=hi[j]) } else { lo[j] });
    flags.extend(std::iter::repeat_n(true, extra));
    Ok((data.vstack(&noise)?, flags))
}

/// Orthonormalized standard-Gaussian matrix with sign-normalized columns.
pub fn random_orthogonal(p: usize, seed: u64) -> OrthMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let mut q = Matrix::from_fn(p, p, |_, _| rng.sample(StandardNormal));
        if gram_schmidt(&mut q) {
            normalize_column_signs(&mut q);
            return OrthMatrix::new(q).expect("Gram-Schmidt output is orthonormal");
        }
    }
}

/// Modified Gram-Schmidt on columns, twice for stability. False on a
/// numerically dependent column.
fn gram_schmidt(q: &mut Matrix) -> bool {
    let p = q.cols();
    for _pass in 0..2 {
        for k in 0..p {
            for j in 0..k {
                let dot: f64 = (0..p).map(|i| q[(i, j)] * q[(i, k)]).sum();
                for i in 0..p {
                    q[(i, k)] -= dot * q[(i, j)];
                }
            }
            let norm = (0..p).map(|i| q[(i, k)] * q[(i, k)]).sum::<f64>().sqrt();
            if norm < 1e-8 {
                return false;
            }
            for i in 0..p {
                q[(i, k)] /= norm;
            }
        }
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Gaussian,
    StudentT { df: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrientationSpec {
    Identity,
    Random { seed: u64 },
    /// Row-major orthogonal matrix.
    Matrix(Vec<Vec<f64>>),
}

impl OrientationSpec {
    pub fn build(&self, p: usize) -> Result<OrthMatrix> {
        match self {
            OrientationSpec::Identity => Ok(OrthMatrix::identity(p)),
            OrientationSpec::Random { seed } => Ok(random_orthogonal(p, *seed)),
            OrientationSpec::Matrix(rows) => {
                let m = Matrix::from_rows(rows)?;
                if m.rows() != p || m.cols() != p {
                    return Err(Error::DimensionMismatch { expected: p, found: m.rows() });
                }
                OrthMatrix::new(m)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSpec {
    pub n: usize,
    pub mean: Vec<f64>,
    pub eigvals: Vec<f64>,
    pub orientation: OrientationSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub name: String,
    pub structure: CovarianceStructure,
    pub family: Family,
    #[serde(default)]
    pub noise_fraction: f64,
    pub seed: u64,
    pub components: Vec<ComponentSpec>,
}

/// Generated sample. Noise rows carry the label `components.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimData {
    pub data: Matrix,
    pub labels: Vec<usize>,
    pub noise: Vec<bool>,
}

impl SimData {
    pub fn signal_rows(&self) -> Vec<usize> {
        (0..self.noise.len()).filter(|&i| !self.noise[i]).collect()
    }
}

impl SimSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: SimSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    /// Shipped specs: `sim1`, `sim2`, and `sim2-noise` (sim2 with 5% noise).
    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "sim1" => Self::from_json(SIM1),
            "sim2" => Self::from_json(SIM2),
            "sim2-noise" => {
                let mut s = Self::from_json(SIM2)?;
                s.name = "sim2-noise".into();
                s.noise_fraction = 0.05;
                Ok(s)
            }
            other => Err(Error::Config(format!("unknown simulation '{other}' (expected sim1, sim2, sim2-noise)"))),
        }
    }

    pub fn dim(&self) -> usize {
        self.components.first().map_or(0, |c| c.mean.len())
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.dim();
        if self.components.is_empty() || p == 0 {
            return Err(Error::Config("simulation needs at least one component of dimension >= 1".into()));
        }
        if let Family::StudentT { df } = self.family {
            if !(df > 2.0) {
                return Err(Error::Config(format!("t degrees of freedom must exceed 2, got {df}")));
            }
        }
        if !(0.0..1.0).contains(&self.noise_fraction) {
            return Err(Error::Config(format!("noise fraction {} outside [0, 1)", self.noise_fraction)));
        }
        for c in &self.components {
            if c.mean.len() != p || c.eigvals.len() != p {
                return Err(Error::DimensionMismatch { expected: p, found: c.mean.len().min(c.eigvals.len()) });
            }
            if c.eigvals.iter().any(|&v| !(v > 0.0)) {
                return Err(Error::Config("component eigenvalues must be positive".into()));
            }
            c.orientation.build(p)?;
        }
        let first = &self.components[0];
        if self.structure.shape_shared() && self.components.iter().any(|c| c.eigvals != first.eigvals) {
            return Err(Error::Config(format!("{} needs equal eigenvalues across components", self.structure)));
        }
        if self.structure.orient_kind() == OrientKind::Shared
            && self.components.iter().any(|c| c.orientation != first.orientation)
        {
            return Err(Error::Config(format!("{} needs a common orientation", self.structure)));
        }
        Ok(())
    }

    /// Population covariance (or t scale) of component `g`.
    pub fn sigma(&self, g: usize) -> Result<SymMatrix> {
        let c = &self.components[g];
        Ok(reconstruct(&c.orientation.build(self.dim())?, &c.eigvals))
    }

    pub fn generate(&self, seed: u64) -> Result<SimData> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data: Option<Matrix> = None;
        let mut labels = Vec::new();
        for (g, c) in self.components.iter().enumerate() {
            let sigma = self.sigma(g)?;
            let block = match self.family {
                Family::Gaussian => mvn_rows(&mut rng, &c.mean, &sigma, c.n)?,
                Family::StudentT { df } => mvt_rows(&mut rng, &c.mean, &sigma, df, c.n)?,
            };
            labels.extend(std::iter::repeat_n(g, c.n));
            data = Some(match data {
                None => block,
                Some(d) => d.vstack(&block)?,
            });
        }
        let data = data.expect("at least one component");
        let (data, noise) = add_noise_rng(&mut rng, &data, self.noise_fraction)?;
        let g = self.components.len();
        labels.resize(data.rows(), g);
        Ok(SimData { data, labels, noise })
    }
}
