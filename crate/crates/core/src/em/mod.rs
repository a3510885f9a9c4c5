//! Constrained EM for the eigenvalue-parameterized mixture family.
//!
//! Each iteration runs an M-step from the current responsibilities under the
//! eigenvalue interval active at that step, then an E-step that produces the
//! new responsibilities and the observed-data log-likelihood. The interval
//! comes from a [`ConstraintSpec`]; when successive intervals are nested the
//! log-likelihood trace is non-decreasing.

mod estep;
mod flury;
mod mstep;

pub use estep::{e_step, log_density_gauss, log_sum_exp};
pub use flury::{flury_objective, update_d_common, FluryConfig, FluryOutcome};
pub use mstep::{
    m_step_covariance, m_step_weights_means, update_b_common, update_b_varying, update_d_varying,
    CovarianceUpdate, GroupStats, EIGEN_FLOOR,
};

use serde::Serialize;

use crate::constraints::{Bounds, ConstraintSpec};
use crate::error::{Error, Result};
use crate::family::{CovarianceFactors, CovarianceStructure};
use crate::linalg::Matrix;
use crate::metrics::bic;

/// Weights, means and covariance factors of a fitted G-component mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureModel {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub factors: CovarianceFactors,
}

impl MixtureModel {
    pub fn new(weights: Vec<f64>, means: Vec<Vec<f64>>, factors: CovarianceFactors) -> Result<Self> {
        let g = factors.groups();
        if weights.len() != g || means.len() != g {
            return Err(Error::DimensionMismatch { expected: g, found: weights.len().min(means.len()) });
        }
        if means.iter().any(|m| m.len() != factors.dim()) {
            return Err(Error::DimensionMismatch { expected: factors.dim(), found: means[0].len() });
        }
        if weights.iter().any(|&w| !(w > 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("mixing weights {weights:?} are not a positive simplex point")));
        }
        Ok(Self { weights, means, factors })
    }

    pub fn groups(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.factors.dim()
    }

    pub fn structure(&self) -> CovarianceStructure {
        self.factors.structure()
    }
}

/// n×G matrix of posterior membership probabilities with cached column sums.
#[derive(Debug, Clone, PartialEq)]
pub struct Responsibilities {
    z: Matrix,
    counts: Vec<f64>,
}

impl Responsibilities {
    /// Validates that every entry lies in [0, 1] and every row sums to 1
    /// within 1e-12.
    pub fn new(z: Matrix) -> Result<Self> {
        for (i, row) in z.row_iter().enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&v| !(0.0..=1.0).contains(&v)) || (sum - 1.0).abs() > 1e-12 {
                return Err(Error::Config(format!("responsibility row {i} is not a probability vector")));
            }
        }
        Ok(Self::from_normalized(z))
    }

    pub(crate) fn from_normalized(z: Matrix) -> Self {
        let mut counts = vec![0.0; z.cols()];
        for row in z.row_iter() {
            for (c, v) in counts.iter_mut().zip(row) {
                *c += v;
            }
        }
        Self { z, counts }
    }

    /// Hard 0/1 responsibilities from labels in `0..groups`.
    pub fn from_labels(labels: &[usize], groups: usize) -> Result<Self> {
        let mut z = Matrix::zeros(labels.len(), groups);
        for (i, &l) in labels.iter().enumerate() {
            if l >= groups {
                return Err(Error::Config(format!("label {l} out of range for {groups} groups")));
            }
            z[(i, l)] = 1.0;
        }
        Ok(Self::from_normalized(z))
    }

    pub fn matrix(&self) -> &Matrix {
        &self.z
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn n(&self) -> usize {
        self.z.rows()
    }

    pub fn groups(&self) -> usize {
        self.z.cols()
    }

    /// Index of the largest responsibility per row, lowest index on ties.
    pub fn map_labels(&self) -> Vec<usize> {
        self.z
            .row_iter()
            .map(|row| {
                let mut best = 0;
                for (g, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = g;
                    }
                }
                best
            })
            .collect()
    }
}

/// Thresholds deciding when a run has collapsed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DegeneracyThresholds {
    /// A group is degenerate when `n_g < p + min_count_offset`.
    pub min_count_offset: f64,
    /// Smallest acceptable eigenvalue candidate before clamping.
    pub min_eigenvalue: f64,
    /// Largest acceptable one-iteration log-likelihood increase.
    pub max_loglik_jump: f64,
}

impl Default for DegeneracyThresholds {
    fn default() -> Self {
        Self { min_count_offset: 1.0, min_eigenvalue: 1e-10, max_loglik_jump: 1e6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DegeneracyKind {
    SmallComponent,
    TinyEigenvalue,
    LoglikJump,
    NotPositiveDefinite,
}

/// Checks the degeneracy rules for one iteration.
pub fn detect_degeneracy(
    counts: &[f64],
    dim: usize,
    min_candidate: Option<f64>,
    loglik_jump: Option<f64>,
    thresholds: &DegeneracyThresholds,
) -> Option<DegeneracyKind> {
    if counts.iter().any(|&c| c < dim as f64 + thresholds.min_count_offset) {
        return Some(DegeneracyKind::SmallComponent);
    }
    if min_candidate.is_some_and(|m| !(m >= thresholds.min_eigenvalue)) {
        return Some(DegeneracyKind::TinyEigenvalue);
    }
    if loglik_jump.is_some_and(|j| j > thresholds.max_loglik_jump) {
        return Some(DegeneracyKind::LoglikJump);
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmConfig {
    pub max_iter: usize,
    /// Relative log-likelihood change that counts as converged.
    pub tol: f64,
    /// Orientation/eigenvalue alternations per M-step.
    pub inner_m: usize,
    pub constraint: ConstraintSpec,
    pub degeneracy: DegeneracyThresholds,
    pub flury: FluryConfig,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            max_iter: 1000,
            tol: 1e-8,
            inner_m: 1,
            constraint: ConstraintSpec::unconstrained(),
            degeneracy: DegeneracyThresholds::default(),
            flury: FluryConfig::default(),
        }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter < 1 || self.inner_m < 1 || !(self.tol > 0.0) {
            return Err(Error::Config("max_iter, inner_m must be >= 1 and tol > 0".into()));
        }
        Ok(())
    }
}

/// One EM iteration as recorded in the trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationRecord {
    pub loglik: f64,
    pub bounds: Bounds,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
}

#[derive(Debug, Clone)]
pub struct FitReport {
    pub structure: CovarianceStructure,
    pub groups: usize,
    /// Last parameters before termination; `None` only when the very first
    /// M-step already collapsed.
    pub model: Option<MixtureModel>,
    pub trace: Vec<IterationRecord>,
    pub loglik: f64,
    pub bic: f64,
    pub map_labels: Vec<usize>,
    pub converged: bool,
    pub degenerate: Option<DegeneracyKind>,
    pub iterations: usize,
    pub flury_budget_exhausted: bool,
}

impl FitReport {
    pub fn is_degenerate(&self) -> bool {
        self.degenerate.is_some()
    }

    pub fn loglik_trace(&self) -> Vec<f64> {
        self.trace.iter().map(|r| r.loglik).collect()
    }

    /// Usable for model selection.
    pub fn is_selectable(&self) -> bool {
        self.converged && self.degenerate.is_none() && self.bic.is_finite()
    }
}

/// Runs constrained EM from the given starting responsibilities.
pub fn fit(
    data: &Matrix,
    structure: CovarianceStructure,
    init: &Responsibilities,
    config: &EmConfig,
) -> Result<FitReport> {
    config.validate()?;
    let (n, p) = (data.rows(), data.cols());
    let groups = init.groups();
    if init.n() != n {
        return Err(Error::DimensionMismatch { expected: n, found: init.n() });
    }
    if n <= groups {
        return Err(Error::TooFewObservations { n, needed: groups + 1 });
    }

    let spec = &config.constraint;
    let mut resp = init.clone();
    let mut model: Option<MixtureModel> = None;
    let mut trace: Vec<IterationRecord> = Vec::new();
    let mut converged = false;
    let mut degenerate = None;
    let mut flury_exhausted = false;

    for t in 1..=config.max_iter {
        let bounds = spec.bounds_at(t);
        let stats = m_step_weights_means(data, &resp);
        if let Some(kind) = detect_degeneracy(&stats.counts, p, None, None, &config.degeneracy) {
            degenerate = Some(kind);
            break;
        }
        let update = m_step_covariance(
            structure,
            &stats,
            model.as_ref().map(|m| &m.factors),
            bounds,
            config.inner_m,
            &config.flury,
        )?;
        flury_exhausted |= update.flury_budget_exhausted;
        if let Some(kind) =
            detect_degeneracy(&stats.counts, p, Some(update.min_candidate), None, &config.degeneracy)
        {
            degenerate = Some(kind);
            break;
        }
        let (lo, hi) = update.factors.min_max_eigval();
        let candidate = MixtureModel { weights: stats.weights, means: stats.means, factors: update.factors };
        let (next_resp, loglik) = match e_step(data, &candidate) {
            Ok(v) => v,
            Err(Error::NotPositiveDefinite { .. }) => {
                degenerate = Some(DegeneracyKind::NotPositiveDefinite);
                break;
            }
            Err(e) => return Err(e),
        };
        let prev = trace.last().map(|r| r.loglik);
        if let Some(kind) =
            detect_degeneracy(&stats.counts, p, None, prev.map(|l| loglik - l), &config.degeneracy)
        {
            degenerate = Some(kind);
            break;
        }
        if !loglik.is_finite() {
            degenerate = Some(DegeneracyKind::LoglikJump);
            break;
        }
        trace.push(IterationRecord { loglik, bounds, min_eigenvalue: lo, max_eigenvalue: hi });
        model = Some(candidate);
        resp = next_resp;

        let interval_fixed = t > 1 && spec.bounds_at(t - 1) == bounds && t > spec.schedule_steps();
        if let (Some(prev), true) = (prev, interval_fixed) {
            if (loglik - prev).abs() < config.tol * loglik.abs() {
                converged = true;
                break;
            }
        }
    }

    let loglik = trace.last().map_or(f64::NEG_INFINITY, |r| r.loglik);
    let m = structure.total_params(groups, p);
    Ok(FitReport {
        structure,
        groups,
        model,
        iterations: trace.len(),
        bic: if loglik.is_finite() { bic(loglik, m, n) } else { f64::INFINITY },
        loglik,
        trace,
        map_labels: resp.map_labels(),
        converged,
        degenerate,
        flury_budget_exhausted: flury_exhausted,
    })
}
