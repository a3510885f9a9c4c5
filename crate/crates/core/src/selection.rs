//! Fitting every (structure, G) cell of a grid and picking the minimal-BIC
//! model.

use crate::em::{fit, EmConfig, FitReport, Responsibilities};
use crate::error::{Error, Result};
use crate::family::CovarianceStructure;
use crate::init::InitSpec;
use crate::linalg::Matrix;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "RGPCM_THREADS";

/// Sizes the global worker pool from `RGPCM_THREADS` when set. Safe to call
/// more than once; only the first call has an effect.
pub fn configure_threads_from_env() -> Result<Option<usize>> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(None);
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got '{raw}'")))?;
    #[cfg(feature = "parallel")]
    {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(Some(n))
}

/// Maps `f` over `items`, in parallel when the `parallel` feature is on.
/// Output order always matches input order.
pub(crate) fn map_cells<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

#[derive(Debug, Clone)]
pub enum CellOutcome {
    /// Best start for the cell; `start` indexes the start seeds.
    Fit { report: Box<FitReport>, start: usize },
    Failed(String),
}

#[derive(Debug, Clone)]
pub struct Cell {
    pub structure: CovarianceStructure,
    pub groups: usize,
    pub outcome: CellOutcome,
}

impl Cell {
    pub fn report(&self) -> Option<&FitReport> {
        match &self.outcome {
            CellOutcome::Fit { report, .. } => Some(report),
            CellOutcome::Failed(_) => None,
        }
    }

    /// BIC if the cell produced a selectable fit.
    pub fn selectable_bic(&self) -> Option<f64> {
        self.report().filter(|r| r.is_selectable()).map(|r| r.bic)
    }

    /// File-name-safe cell key such as `EE_G2`.
    pub fn key(&self) -> String {
        format!("{}_G{}", self.structure, self.groups)
    }
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub structures: Vec<CovarianceStructure>,
    pub groups: Vec<usize>,
    /// Row-major over `groups` × `structures`.
    pub cells: Vec<Cell>,
    /// Index into `cells` of the minimal-BIC selectable fit.
    pub best: Option<usize>,
}

impl SweepResult {
    pub fn cell(&self, structure: CovarianceStructure, groups: usize) -> Option<&Cell> {
        self.cells.iter().find(|c| c.structure == structure && c.groups == groups)
    }

    pub fn best_cell(&self) -> Option<&Cell> {
        self.best.map(|i| &self.cells[i])
    }

    pub fn best_key(&self) -> Option<(CovarianceStructure, usize)> {
        self.best_cell().map(|c| (c.structure, c.groups))
    }

    /// Rows `G`, columns structures; `None` marks a failed, degenerate, or
    /// unconverged cell.
    pub fn bic_table(&self) -> Vec<(usize, Vec<Option<f64>>)> {
        let s = self.structures.len();
        self.groups
            .iter()
            .enumerate()
            .map(|(r, &g)| (g, self.cells[r * s..(r + 1) * s].iter().map(Cell::selectable_bic).collect()))
            .collect()
    }
}

/// Index of the smallest finite value; earliest index wins ties.
fn argmin(values: impl Iterator<Item = Option<f64>>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.enumerate() {
        if let Some(v) = v {
            if best.is_none_or(|(_, b)| v < b) {
                best = Some((i, v));
            }
        }
    }
    best.map(|(i, _)| i)
}

/// Start seeds `seed, seed + 1, …`.
pub fn start_specs(init: &InitSpec, starts: usize) -> Vec<InitSpec> {
    (0..starts as u64).map(|k| InitSpec { seed: init.seed.wrapping_add(k), ..*init }).collect()
}

/// Single-start sweep.
pub fn sweep(
    data: &Matrix,
    structures: &[CovarianceStructure],
    groups: &[usize],
    init: &InitSpec,
    config: &EmConfig,
) -> Result<SweepResult> {
    sweep_with_starts(data, structures, groups, init, 1, config)
}

/// Fits every cell from `starts` initializations and keeps, per cell, the
/// selectable fit with the highest log-likelihood.
pub fn sweep_with_starts(
    data: &Matrix,
    structures: &[CovarianceStructure],
    groups: &[usize],
    init: &InitSpec,
    starts: usize,
    config: &EmConfig,
) -> Result<SweepResult> {
    config.validate()?;
    if starts < 1 {
        return Err(Error::Config("starts must be >= 1".into()));
    }
    if structures.is_empty() && !groups.is_empty() {
        return Err(Error::Config("no covariance structures requested".into()));
    }
    let specs = start_specs(init, starts);
    let init_jobs: Vec<(usize, InitSpec)> =
        groups.iter().flat_map(|&g| specs.iter().map(move |s| (g, *s))).collect();
    let inits: Vec<std::result::Result<Responsibilities, String>> =
        map_cells(&init_jobs, |(g, s)| s.build(data, *g).map_err(|e| e.to_string()));

    let jobs: Vec<(usize, usize, CovarianceStructure)> = groups
        .iter()
        .enumerate()
        .flat_map(|(r, &g)| structures.iter().map(move |&s| (r, g, s)))
        .collect();
    let cells = map_cells(&jobs, |&(r, g, structure)| {
        let mut best: Option<(FitReport, usize)> = None;
        let mut error = None;
        for k in 0..starts {
            let start = match &inits[r * starts + k] {
                Ok(z) => z,
                Err(e) => {
                    error.get_or_insert_with(|| e.clone());
                    continue;
                }
            };
            match fit(data, structure, start, config) {
                Ok(rep) => {
                    let better = match &best {
                        None => true,
                        Some((b, _)) => match (rep.is_selectable(), b.is_selectable()) {
                            (true, false) => true,
                            (true, true) => rep.loglik > b.loglik,
                            _ => false,
                        },
                    };
                    if better {
                        best = Some((rep, k));
                    }
                }
                Err(e) => {
                    error.get_or_insert_with(|| e.to_string());
                }
            }
        }
        let outcome = match best {
            Some((report, start)) => CellOutcome::Fit { report: Box::new(report), start },
            None => CellOutcome::Failed(error.unwrap_or_else(|| "no start produced a fit".into())),
        };
        Cell { structure, groups: g, outcome }
    });
    let best = argmin(cells.iter().map(Cell::selectable_bic));
    Ok(SweepResult { structures: structures.to_vec(), groups: groups.to_vec(), cells, best })
}

/// Parses `a:b` or a single integer into an inclusive list of group counts.
pub fn parse_group_range(s: &str) -> Result<Vec<usize>> {
    let bad = || Error::Config(format!("invalid group range '{s}' (expected N or A:B)"));
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
    let (lo, hi) = match s.split_once(':') {
        Some((a, b)) => (parse(a)?, parse(b)?),
        None => {
            let g = parse(s)?;
            (g, g)
        }
    };
    if lo < 1 || lo > hi {
        return Err(bad());
    }
    Ok((lo..=hi).collect())
}
