//! Report files. Every number is written with 17 significant digits so that
//! identical runs give byte-identical files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::em::{DegeneracyThresholds, FitReport};
use crate::error::{Error, Result};
use crate::experiment::ConvergenceReport;
use crate::io::{fmt_f64, write_json, write_rows};
use crate::metrics::{ari, classification_table, Partition};
use crate::selection::SweepResult;

pub const BIC_TABLE: &str = "bic_table.csv";
pub const CONVERGENCE_TABLE: &str = "convergence_table.csv";
pub const CONVERGENCE_RUNS: &str = "convergence_runs.csv";
pub const CLASSIFICATION_TABLE: &str = "classification_table.csv";
pub const RUN_META: &str = "run_meta.json";

/// Per-run metadata. Contains no timestamps or host details.
#[derive(Debug, Clone, Serialize)]
pub struct RunMeta {
    pub tool: String,
    pub command: String,
    pub source: String,
    pub n: usize,
    pub p: usize,
    pub standardized: bool,
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub thresholds: DegeneracyThresholds,
    pub decisions: BTreeMap<String, String>,
    pub outcome: serde_json::Value,
}

impl RunMeta {
    pub fn new(command: &str, source: &str, n: usize, p: usize) -> Self {
        Self {
            tool: format!("rgpcm {}", env!("CARGO_PKG_VERSION")),
            command: command.into(),
            source: source.into(),
            n,
            p,
            standardized: false,
            config: serde_json::Value::Null,
            seeds: Vec::new(),
            thresholds: DegeneracyThresholds::default(),
            decisions: default_decisions(),
            outcome: serde_json::Value::Null,
        }
    }
}

/// Conventions that affect how numbers in the reports should be read.
pub fn default_decisions() -> BTreeMap<String, String> {
    [
        ("bic_convention", "-2 loglik + m ln n, lower is better"),
        ("na_cells", "failed, degenerate, or unconverged fits are written as NA and never selected"),
        ("best_loglik_tie_tolerance", "1e-6 absolute"),
        ("degenerate_runs_in_loglik_comparison", "excluded; counted only in the degeneracy columns"),
        ("unconverged_runs_in_loglik_comparison", "excluded"),
        ("random_start_seeds", "seed, seed+1, ..., seed+starts-1"),
        ("schedule", "equidistant v from 0 to 1, bounds beta*(1-v, 1-ln(1-v)); after the schedule every regime is (0, inf)"),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect()
}

pub enum RunResults<'a> {
    Fit { sweep: &'a SweepResult, truth: Option<&'a [String]> },
    Converge(&'a ConvergenceReport),
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    if !dir.is_dir() {
        return Err(Error::Config(format!("{} is not a directory", dir.display())));
    }
    Ok(())
}

/// Writes every report that applies to `results` into `dir` and returns the
/// paths in write order.
pub fn emit_reports(results: &RunResults<'_>, meta: &RunMeta, dir: &Path) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let mut written = Vec::new();
    match results {
        RunResults::Fit { sweep, truth } => {
            let p = dir.join(BIC_TABLE);
            write_bic_table(&p, sweep)?;
            written.push(p);
            let p = dir.join(CLASSIFICATION_TABLE);
            let labels = sweep.best_cell().and_then(|c| c.report()).map(|r| r.map_labels.as_slice());
            write_classification_table(&p, *truth, labels)?;
            written.push(p);
            for cell in &sweep.cells {
                if let Some(rep) = cell.report() {
                    let p = dir.join(format!("trace_{}.csv", cell.key()));
                    write_trace(&p, rep)?;
                    written.push(p);
                }
            }
        }
        RunResults::Converge(conv) => {
            let p = dir.join(CONVERGENCE_TABLE);
            write_convergence_table(&p, conv)?;
            written.push(p);
            let p = dir.join(CONVERGENCE_RUNS);
            write_convergence_runs(&p, conv)?;
            written.push(p);
        }
    }
    let p = dir.join(RUN_META);
    write_json(&p, meta)?;
    written.push(p);
    Ok(written)
}

/// Rows `G`, columns structure tags, `NA` for unusable cells.
pub fn write_bic_table(path: &Path, sweep: &SweepResult) -> Result<()> {
    let mut header = vec!["G".to_string()];
    header.extend(sweep.structures.iter().map(|s| s.to_string()));
    let rows: Vec<Vec<String>> = sweep
        .bic_table()
        .into_iter()
        .map(|(g, vals)| {
            let mut r = vec![g.to_string()];
            r.extend(vals.into_iter().map(|v| v.map_or_else(|| "NA".to_string(), fmt_f64)));
            r
        })
        .collect();
    write_rows(path, &header, &rows)
}

/// Truth classes as rows, predicted clusters (1-based) as columns. Without
/// truth labels the single row `all` holds cluster sizes; without a
/// prediction only the header is written.
pub fn write_classification_table(path: &Path, truth: Option<&[String]>, pred: Option<&[usize]>) -> Result<()> {
    let Some(pred) = pred else {
        return write_rows(path, &["truth".to_string()], &[]);
    };
    let groups = pred.iter().max().map_or(0, |m| m + 1);
    let mut header = vec!["truth".to_string()];
    header.extend((1..=groups).map(|g| g.to_string()));
    let rows = match truth {
        None => {
            let mut sizes = vec![0usize; groups];
            pred.iter().for_each(|&g| sizes[g] += 1);
            let mut r = vec!["all".to_string()];
            r.extend(sizes.iter().map(|s| s.to_string()));
            vec![r]
        }
        Some(t) => {
            let names = first_appearance(t);
            let tp = Partition::from_labels(t);
            // keep predicted labels as-is so columns match cluster indices
            let mut table = vec![vec![0usize; groups]; names.len()];
            for (&a, &b) in tp.labels().iter().zip(pred) {
                table[a][b] += 1;
            }
            names
                .into_iter()
                .zip(table)
                .map(|(name, counts)| {
                    let mut r = vec![name];
                    r.extend(counts.iter().map(|c| c.to_string()));
                    r
                })
                .collect()
        }
    };
    write_rows(path, &header, &rows)
}

/// Distinct labels in order of first appearance, matching
/// `Partition::from_labels`.
fn first_appearance(labels: &[String]) -> Vec<String> {
    let mut seen = std::collections::HashSet::new();
    labels.iter().filter(|l| seen.insert(*l)).cloned().collect()
}

pub fn write_trace(path: &Path, rep: &FitReport) -> Result<()> {
    let header: Vec<String> = ["iteration", "loglik", "lower", "upper", "min_eigenvalue", "max_eigenvalue"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows: Vec<Vec<String>> = rep
        .trace
        .iter()
        .enumerate()
        .map(|(t, r)| {
            vec![
                (t + 1).to_string(),
                fmt_f64(r.loglik),
                fmt_f64(r.bounds.lower),
                fmt_f64(r.bounds.upper),
                fmt_f64(r.min_eigenvalue),
                fmt_f64(r.max_eigenvalue),
            ]
        })
        .collect();
    write_rows(path, &header, &rows)
}

/// Proportion of starts at the best log-likelihood per regime, then the
/// proportion of degenerate starts per regime.
pub fn write_convergence_table(path: &Path, conv: &ConvergenceReport) -> Result<()> {
    let mut header = vec!["model".to_string(), "G".to_string()];
    header.extend(conv.regimes.iter().map(|r| r.label().to_string()));
    header.extend(conv.regimes.iter().map(|r| format!("degeneracy_{}", r.label())));
    let rows: Vec<Vec<String>> = conv
        .rows
        .iter()
        .map(|row| {
            let mut r = vec![row.structure.to_string(), row.groups.to_string()];
            r.extend(row.best_fraction.iter().map(|v| fmt_f64(*v)));
            r.extend(row.degenerate_fraction.iter().map(|v| fmt_f64(*v)));
            r
        })
        .collect();
    write_rows(path, &header, &rows)
}

/// One line per (structure, G, start, regime).
pub fn write_convergence_runs(path: &Path, conv: &ConvergenceReport) -> Result<()> {
    let header: Vec<String> =
        ["model", "G", "start", "seed", "regime", "loglik", "iterations", "converged", "degenerate", "best", "error"]
            .iter()
            .map(|s| s.to_string())
            .collect();
    let mut rows = Vec::new();
    for rec in &conv.records {
        for run in &rec.runs {
            rows.push(vec![
                rec.structure.to_string(),
                rec.groups.to_string(),
                rec.start.to_string(),
                rec.seed.to_string(),
                run.regime.label().to_string(),
                fmt_f64(run.loglik),
                run.iterations.to_string(),
                run.converged.to_string(),
                run.degenerate.to_string(),
                run.best.to_string(),
                run.error.clone().unwrap_or_default(),
            ]);
        }
    }
    write_rows(path, &header, &rows)
}

/// Summary of the selected model for metadata, including the ARI when truth
/// labels are known.
pub fn best_summary(sweep: &SweepResult, truth: Option<&[String]>) -> Result<serde_json::Value> {
    let Some(cell) = sweep.best_cell() else {
        return Ok(serde_json::json!({ "selected": null, "reason": "no model selected: every cell failed, degenerated, or did not converge" }));
    };
    let rep = cell.report().expect("best cell has a report");
    let ari_value = match truth {
        Some(t) => Some(ari(&Partition::from_labels(t), &Partition::from_labels(&rep.map_labels))?),
        None => None,
    };
    let table = match truth {
        Some(t) => Some(classification_table(&Partition::from_labels(t), &Partition::from_labels(&rep.map_labels))?),
        None => None,
    };
    Ok(serde_json::json!({
        "selected": { "structure": cell.structure, "G": cell.groups },
        "bic": rep.bic,
        "loglik": rep.loglik,
        "iterations": rep.iterations,
        "ari": ari_value,
        "classification": table,
    }))
}
