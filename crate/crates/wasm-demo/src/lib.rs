//! Browser front end for rgpcm: simulate a 2-D mixture, fit one model, and
//! replay the four constraint regimes from a shared random start.
//!
//! Every export returns a JSON string. The `*_json` functions hold the logic
//! and run natively, so they are tested without a browser.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use rgpcm::constraints::{schedule_bounds, static_bounds_from_data};
use rgpcm::init::random_init;
use rgpcm::io::{standardize, Dataset};
use rgpcm::linalg::{eig_sym, SymMatrix};
use rgpcm::simulate::{random_orthogonal, sample_mvn};
use rgpcm::{
    fit, Bounds, ConstraintSpec, CovarianceStructure, EmConfig, Error, FitReport, InitKind, InitSpec, Matrix, Regime,
    Result, Schedule,
};

const POINTS_PER_COMPONENT: usize = 80;

fn points_matrix(xy: &[f64]) -> Result<Matrix> {
    if !xy.len().is_multiple_of(2) {
        return Err(Error::Config("points must be flat x,y pairs".into()));
    }
    Matrix::from_row_major(xy.len() / 2, 2, xy.to_vec())
}

fn finite_or_null(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

/// Components placed on a circle of radius `separation`, each with its own
/// random orientation and an elongation between 1:1 and 6:1.
pub fn simulate_json(components: usize, separation: f64, seed: u64) -> Result<Value> {
    if !(1..=6).contains(&components) {
        return Err(Error::Config("components must be between 1 and 6".into()));
    }
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for g in 0..components {
        let angle = std::f64::consts::TAU * g as f64 / components as f64;
        let mean = [separation * angle.cos(), separation * angle.sin()];
        let s = seed.wrapping_mul(31).wrapping_add(g as u64);
        let elong = 1.0 + 5.0 * ((s % 97) as f64 / 96.0);
        let d = random_orthogonal(2, s);
        let sigma = rgpcm::linalg::reconstruct(&d, &[elong, 1.0]);
        let block = sample_mvn(&mean, &sigma, POINTS_PER_COMPONENT, s)?;
        for row in block.row_iter() {
            points.push([row[0], row[1]]);
            labels.push(g);
        }
    }
    Ok(json!({ "points": points, "labels": labels }))
}

/// Centre and half-axes of the 2-standard-deviation ellipse of `sigma`.
fn ellipse(mean: &[f64], sigma: &SymMatrix) -> Result<Value> {
    let eig = eig_sym(sigma)?;
    let v = eig.vectors.as_matrix();
    Ok(json!({
        "cx": mean[0],
        "cy": mean[1],
        "rx": 2.0 * eig.values[0].max(0.0).sqrt(),
        "ry": 2.0 * eig.values[1].max(0.0).sqrt(),
        "angle": v[(1, 0)].atan2(v[(0, 0)]),
    }))
}

fn report_json(rep: &FitReport) -> Result<Value> {
    let ellipses = match &rep.model {
        Some(m) => (0..m.groups())
            .map(|g| ellipse(&m.means[g], &m.factors.assemble_sigma(g)))
            .collect::<Result<Vec<_>>>()?,
        None => Vec::new(),
    };
    Ok(json!({
        "structure": rep.structure,
        "groups": rep.groups,
        "loglik": finite_or_null(rep.loglik),
        "bic": finite_or_null(rep.bic),
        "converged": rep.converged,
        "degenerate": rep.degenerate.map(|d| format!("{d:?}")),
        "iterations": rep.iterations,
        "labels": rep.map_labels,
        "weights": rep.model.as_ref().map(|m| m.weights.clone()),
        "ellipses": ellipses,
        "trace": rep.loglik_trace(),
        "lower": rep.trace.iter().map(|r| r.bounds.lower).collect::<Vec<_>>(),
        "upper": rep.trace.iter().map(|r| finite_or_null(r.bounds.upper)).collect::<Vec<_>>(),
    }))
}

fn parse_bounds(mode: &str, data: &Matrix) -> Result<Bounds> {
    match mode {
        "data" => static_bounds_from_data(data),
        "none" => Ok(Bounds::VACUOUS),
        other => Err(Error::Config(format!("unknown bounds mode '{other}'"))),
    }
}

/// One k-means-initialized fit of `structure` with `groups` components.
pub fn fit_json(xy: &[f64], structure: &str, groups: usize, bounds: &str, seed: u64) -> Result<Value> {
    let data = points_matrix(xy)?;
    let structure: CovarianceStructure = structure.parse()?;
    let cfg = EmConfig { constraint: ConstraintSpec::fixed(parse_bounds(bounds, &data)?), ..EmConfig::default() };
    let init = InitSpec::kmeans(seed).build(&data, groups)?;
    report_json(&fit(&data, structure, &init, &cfg)?)
}

/// All four regimes from the same random partition on standardized data.
pub fn compare_regimes_json(
    xy: &[f64],
    structure: &str,
    groups: usize,
    seed: u64,
    schedule_len: usize,
    beta: f64,
) -> Result<Value> {
    let raw = Dataset::new(vec!["x".into(), "y".into()], points_matrix(xy)?)?;
    let data = standardize(&raw)?.values;
    let structure: CovarianceStructure = structure.parse()?;
    let schedule = Schedule::new(schedule_len, beta)?;
    let init = random_init(data.rows(), groups, seed, InitKind::RandomPartition)?;
    let runs = Regime::ALL
        .iter()
        .map(|&regime| {
            let constraint = match regime {
                Regime::None => ConstraintSpec::unconstrained(),
                r => ConstraintSpec::dynamic(r, schedule),
            };
            let cfg = EmConfig { constraint, ..EmConfig::default() };
            let mut v = report_json(&fit(&data, structure, &init, &cfg)?)?;
            v["regime"] = json!(regime.label());
            Ok(v)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(json!({ "runs": runs }))
}

/// The relaxation schedule: position, lower and upper bound per step.
pub fn schedule_json(len: usize, beta: f64) -> Result<Value> {
    let s = Schedule::new(len, beta)?;
    let mut v = Vec::with_capacity(len);
    let mut lower = Vec::with_capacity(len);
    let mut upper = Vec::with_capacity(len);
    for t in 1..=len {
        let pos = s.position(t);
        let b = schedule_bounds(pos, beta)?;
        v.push(pos);
        lower.push(b.lower);
        upper.push(finite_or_null(b.upper));
    }
    Ok(json!({ "v": v, "lower": lower, "upper": upper }))
}

fn export(r: Result<Value>) -> std::result::Result<String, JsError> {
    r.map(|v| v.to_string()).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn simulate(components: usize, separation: f64, seed: u32) -> std::result::Result<String, JsError> {
    export(simulate_json(components, separation, seed.into()))
}

#[wasm_bindgen(js_name = fitPoints)]
pub fn fit_points(
    xy: &[f64],
    structure: &str,
    groups: usize,
    bounds: &str,
    seed: u32,
) -> std::result::Result<String, JsError> {
    export(fit_json(xy, structure, groups, bounds, seed.into()))
}

#[wasm_bindgen(js_name = compareRegimes)]
pub fn compare_regimes(
    xy: &[f64],
    structure: &str,
    groups: usize,
    seed: u32,
    schedule_len: usize,
    beta: f64,
) -> std::result::Result<String, JsError> {
    export(compare_regimes_json(xy, structure, groups, seed.into(), schedule_len, beta))
}

#[wasm_bindgen(js_name = scheduleCurve)]
pub fn schedule_curve(len: usize, beta: f64) -> std::result::Result<String, JsError> {
    export(schedule_json(len, beta))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(v: &Value) -> Vec<f64> {
        v["points"].as_array().unwrap().iter().flat_map(|p| [p[0].as_f64().unwrap(), p[1].as_f64().unwrap()]).collect()
    }

    #[test]
    fn simulate_is_deterministic() {
        let a = simulate_json(3, 6.0, 4).unwrap();
        assert_eq!(a, simulate_json(3, 6.0, 4).unwrap());
        assert_eq!(a["points"].as_array().unwrap().len(), 3 * POINTS_PER_COMPONENT);
        assert!(simulate_json(0, 6.0, 4).is_err());
    }

    #[test]
    fn fit_recovers_separated_groups() {
        let sim = simulate_json(2, 10.0, 1).unwrap();
        let out = fit_json(&flat(&sim), "VV", 2, "none", 1).unwrap();
        assert_eq!(out["converged"], true);
        assert_eq!(out["ellipses"].as_array().unwrap().len(), 2);
        let labels: Vec<u64> = out["labels"].as_array().unwrap().iter().map(|l| l.as_u64().unwrap()).collect();
        let truth: Vec<u64> = sim["labels"].as_array().unwrap().iter().map(|l| l.as_u64().unwrap()).collect();
        let agree = labels.iter().zip(&truth).filter(|(a, b)| a == b).count();
        assert!(agree == truth.len() || agree == 0);
    }

    #[test]
    fn fit_rejects_bad_input() {
        assert!(fit_json(&[1.0, 2.0, 3.0], "VV", 2, "none", 1).is_err());
        assert!(fit_json(&[0.0; 20], "XX", 2, "none", 1).is_err());
        assert!(fit_json(&[0.0; 20], "VV", 2, "sideways", 1).is_err());
    }

    #[test]
    fn regimes_share_a_start() {
        let sim = simulate_json(3, 5.0, 2).unwrap();
        let out = compare_regimes_json(&flat(&sim), "VV", 3, 5, 25, 1.0).unwrap();
        let runs = out["runs"].as_array().unwrap();
        assert_eq!(runs.len(), 4);
        let names: Vec<&str> = runs.iter().map(|r| r["regime"].as_str().unwrap()).collect();
        assert_eq!(names, ["None", "Lower", "Upper", "Range"]);
        assert_eq!(runs[3]["lower"][0], 1.0);
        assert_eq!(runs[0]["upper"][0], Value::Null);
    }

    #[test]
    fn schedule_endpoints() {
        let s = schedule_json(25, 1.0).unwrap();
        assert_eq!(s["lower"][0], 1.0);
        assert_eq!(s["upper"][0], 1.0);
        assert_eq!(s["lower"][24], 0.0);
        assert_eq!(s["upper"][24], Value::Null);
        assert!(schedule_json(1, 1.0).is_err());
    }
}
