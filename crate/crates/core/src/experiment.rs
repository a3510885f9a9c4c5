//! Random-start comparison of constraint regimes.

use serde::Serialize;

use crate::constraints::{ConstraintSpec, Regime, Schedule};
use crate::em::{fit, EmConfig};
use crate::error::{Error, Result};
use crate::family::CovarianceStructure;
use crate::init::{random_init, InitKind};
use crate::linalg::Matrix;
use crate::selection::map_cells;

/// Regimes within this absolute log-likelihood of the best count as tied.
pub const TIE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    /// Free-form description of the data source, echoed into metadata.
    pub source: String,
    pub structures: Vec<CovarianceStructure>,
    pub groups: Vec<usize>,
    pub regimes: Vec<Regime>,
    pub starts: usize,
    pub seed: u64,
    pub init_kind: InitKind,
    pub schedule: Schedule,
    pub max_iter: usize,
    pub tol: f64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.structures.is_empty() || self.groups.is_empty() || self.regimes.is_empty() {
            return Err(Error::Config("experiment grid must be non-empty".into()));
        }
        if self.starts < 1 {
            return Err(Error::Config("starts must be >= 1".into()));
        }
        if !matches!(self.init_kind, InitKind::RandomPartition | InitKind::RandomResponsibilities) {
            return Err(Error::Config("convergence experiments need a random init kind".into()));
        }
        self.em_config(Regime::None).validate()
    }

    pub fn em_config(&self, regime: Regime) -> EmConfig {
        let constraint = match regime {
            Regime::None => ConstraintSpec::unconstrained(),
            r => ConstraintSpec::dynamic(r, self.schedule),
        };
        EmConfig { max_iter: self.max_iter, tol: self.tol, constraint, ..EmConfig::default() }
    }

    /// Seed of start `k`.
    pub fn start_seed(&self, k: usize) -> u64 {
        self.seed.wrapping_add(k as u64)
    }
}

/// Outcome of one regime from one start.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeRun {
    pub regime: Regime,
    pub loglik: f64,
    pub converged: bool,
    pub degenerate: bool,
    pub iterations: usize,
    /// Set when the fit itself errored.
    pub error: Option<String>,
    /// Counted as attaining the best converged log-likelihood for this start.
    pub best: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StartRecord {
    pub structure: CovarianceStructure,
    pub groups: usize,
    pub start: usize,
    pub seed: u64,
    pub runs: Vec<RegimeRun>,
}

/// One table row: per-regime fractions over starts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub structure: CovarianceStructure,
    pub groups: usize,
    pub best_fraction: Vec<f64>,
    pub degenerate_fraction: Vec<f64>,
    /// Starts where no regime produced a converged, non-degenerate fit.
    pub starts_without_winner: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub regimes: Vec<Regime>,
    pub starts: usize,
    pub tie_tol: f64,
    pub rows: Vec<ConvergenceRow>,
    pub records: Vec<StartRecord>,
}

impl ConvergenceReport {
    pub fn row(&self, structure: CovarianceStructure, groups: usize) -> Option<&ConvergenceRow> {
        self.rows.iter().find(|r| r.structure == structure && r.groups == groups)
    }

    pub fn regime_index(&self, regime: Regime) -> Option<usize> {
        self.regimes.iter().position(|&r| r == regime)
    }

    /// Degenerate runs of `regime` for `structure` summed over all group counts.
    pub fn degenerate_count(&self, structure: CovarianceStructure, regime: Regime) -> usize {
        let Some(k) = self.regime_index(regime) else { return 0 };
        self.records.iter().filter(|r| r.structure == structure && r.runs[k].degenerate).count()
    }
}

/// Marks every run within `TIE_TOL` of the best converged, non-degenerate
/// log-likelihood. Returns false when no run qualifies.
fn mark_best(runs: &mut [RegimeRun]) -> bool {
    let eligible = |r: &RegimeRun| r.converged && !r.degenerate && r.error.is_none() && r.loglik.is_finite();
    let top = runs.iter().filter(|r| eligible(r)).map(|r| r.loglik).fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return false;
    }
    for r in runs.iter_mut() {
        r.best = eligible(r) && r.loglik >= top - TIE_TOL;
    }
    true
}

/// Runs every requested regime from the same random starts for every
/// (structure, G) cell.
pub fn run_convergence_experiment(data: &Matrix, cfg: &ExperimentConfig) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let jobs: Vec<(CovarianceStructure, usize, usize)> = cfg
        .structures
        .iter()
        .flat_map(|&s| cfg.groups.iter().flat_map(move |&g| (0..cfg.starts).map(move |k| (s, g, k))))
        .collect();
    let configs: Vec<EmConfig> = cfg.regimes.iter().map(|&r| cfg.em_config(r)).collect();

    let records: Vec<StartRecord> = map_cells(&jobs, |&(structure, groups, start)| {
        let seed = cfg.start_seed(start);
        let init = random_init(data.rows(), groups, seed, cfg.init_kind);
        let mut runs: Vec<RegimeRun> = cfg
            .regimes
            .iter()
            .zip(&configs)
            .map(|(&regime, em)| {
                let outcome = init.as_ref().map_err(|e| e.to_string()).and_then(|z| {
                    fit(data, structure, z, em).map_err(|e| e.to_string())
                });
                match outcome {
                    Ok(rep) => RegimeRun {
                        regime,
                        loglik: rep.loglik,
                        converged: rep.converged,
                        degenerate: rep.is_degenerate(),
                        iterations: rep.iterations,
                        error: None,
                        best: false,
                    },
                    Err(e) => RegimeRun {
                        regime,
                        loglik: f64::NEG_INFINITY,
                        converged: false,
                        degenerate: false,
                        iterations: 0,
                        error: Some(e),
                        best: false,
                    },
                }
            })
            .collect();
        mark_best(&mut runs);
        StartRecord { structure, groups, start, seed, runs }
    });

    let r = cfg.regimes.len();
    let mut rows = Vec::new();
    for &structure in &cfg.structures {
        for &groups in &cfg.groups {
            let cell: Vec<&StartRecord> =
                records.iter().filter(|x| x.structure == structure && x.groups == groups).collect();
            let total = cell.len() as f64;
            let frac = |pred: &dyn Fn(&RegimeRun) -> bool| -> Vec<f64> {
                (0..r).map(|k| cell.iter().filter(|x| pred(&x.runs[k])).count() as f64 / total).collect()
            };
            rows.push(ConvergenceRow {
                structure,
                groups,
                best_fraction: frac(&|run| run.best),
                degenerate_fraction: frac(&|run| run.degenerate),
                starts_without_winner: cell.iter().filter(|x| !x.runs.iter().any(|run| run.best)).count(),
            });
        }
    }
    Ok(ConvergenceReport { regimes: cfg.regimes.clone(), starts: cfg.starts, tie_tol: TIE_TOL, rows, records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SymMatrix;
    use crate::simulate::sample_mvn;

    fn data() -> Matrix {
        let a = sample_mvn(&[0.0, 0.0], &SymMatrix::identity(2), 40, 1).unwrap();
        let b = sample_mvn(&[9.0, 0.0], &SymMatrix::identity(2), 40, 2).unwrap();
        a.vstack(&b).unwrap()
    }

    fn cfg(regimes: Vec<Regime>, structures: Vec<CovarianceStructure>) -> ExperimentConfig {
        ExperimentConfig {
            source: "test".into(),
            structures,
            groups: vec![2],
            regimes,
            starts: 4,
            seed: 3,
            init_kind: InitKind::RandomPartition,
            schedule: Schedule::default(),
            max_iter: 500,
            tol: 1e-8,
        }
    }

    #[test]
    fn single_regime_always_wins() {
        let rep = run_convergence_experiment(&data(), &cfg(vec![Regime::Range], vec![CovarianceStructure::EI])).unwrap();
        assert_eq!(rep.rows[0].best_fraction, vec![1.0]);
        assert_eq!(rep.rows[0].degenerate_fraction, vec![0.0]);
    }

    #[test]
    fn tied_regimes_all_count() {
        let rep = run_convergence_experiment(&data(), &cfg(Regime::ALL.to_vec(), vec![CovarianceStructure::EI])).unwrap();
        for rec in &rep.records {
            let top = rec.runs.iter().map(|r| r.loglik).fold(f64::NEG_INFINITY, f64::max);
            for r in &rec.runs {
                assert_eq!(r.best, r.loglik >= top - TIE_TOL);
            }
            assert!(rec.runs.iter().filter(|r| r.best).count() >= 2);
        }
        let row = &rep.rows[0];
        assert!(row.best_fraction.iter().all(|&f| f >= 0.5));
        assert_eq!(row.best_fraction[2], 1.0);
    }

    #[test]
    fn fractions_are_proportions() {
        let c = cfg(Regime::ALL.to_vec(), vec![CovarianceStructure::VV, CovarianceStructure::VE]);
        let rep = run_convergence_experiment(&data(), &c).unwrap();
        for row in &rep.rows {
            for v in row.best_fraction.iter().chain(&row.degenerate_fraction) {
                assert!((0.0..=1.0).contains(v));
            }
        }
        assert_eq!(rep.records.len(), 8);
        assert_eq!(rep, run_convergence_experiment(&data(), &c).unwrap());
    }

    #[test]
    fn mark_best_handles_ties_and_exclusions() {
        let run = |loglik, converged, degenerate| RegimeRun {
            regime: Regime::None,
            loglik,
            converged,
            degenerate,
            iterations: 1,
            error: None,
            best: false,
        };
        let mut runs = vec![run(-10.0, true, false), run(-10.0 + 5e-7, true, false), run(-5.0, true, true), run(-11.0, true, false)];
        assert!(mark_best(&mut runs));
        assert_eq!(runs.iter().map(|r| r.best).collect::<Vec<_>>(), vec![true, true, false, false]);
        let mut none = vec![run(-1.0, false, false), run(-2.0, true, true)];
        assert!(!mark_best(&mut none));
    }

    #[test]
    fn rejects_kmeans_and_empty_grid() {
        let mut c = cfg(vec![Regime::None], vec![CovarianceStructure::EI]);
        c.init_kind = InitKind::KMeans;
        assert!(c.validate().is_err());
        let mut c = cfg(vec![], vec![CovarianceStructure::EI]);
        c.starts = 1;
        assert!(c.validate().is_err());
    }
}
