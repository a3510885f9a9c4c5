use crate::error::{Error, Result};
use crate::linalg::{cholesky, Cholesky, Matrix, SymMatrix};

use super::{MixtureModel, Responsibilities};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// log φ(x | mean, sigma), via the Cholesky factor of `sigma`.
pub fn log_density_gauss(x: &[f64], mean: &[f64], sigma: &SymMatrix) -> Result<f64> {
    let p = sigma.dim();
    if x.len() != p || mean.len() != p {
        return Err(Error::DimensionMismatch { expected: p, found: x.len().min(mean.len()) });
    }
    let chol = cholesky(sigma)?;
    let mut scratch = Vec::with_capacity(p);
    Ok(log_density_chol(x, mean, &chol, &mut scratch))
}

#[inline]
fn log_density_chol(x: &[f64], mean: &[f64], chol: &Cholesky, scratch: &mut Vec<f64>) -> f64 {
    let p = x.len() as f64;
    let maha = chol.mahalanobis_sq(x, mean, scratch);
    -0.5 * (p * LN_2PI + chol.log_det() + maha)
}

/// Log-sum-exp of a slice; `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Posterior membership probabilities and the observed-data log-likelihood.
pub fn e_step(data: &Matrix, model: &MixtureModel) -> Result<(Responsibilities, f64)> {
    let n = data.rows();
    let g_count = model.groups();
    let mut comps = Vec::with_capacity(g_count);
    for g in 0..g_count {
        let chol = cholesky(&model.factors.assemble_sigma(g))?;
        comps.push((model.weights[g].ln(), chol));
    }

    let mut z = Matrix::zeros(n, g_count);
    let mut loglik = 0.0;
    let mut scratch = Vec::with_capacity(data.cols());
    let mut row_logs = vec![0.0; g_count];
    for i in 0..n {
        let x = data.row(i);
        for (g, (log_w, chol)) in comps.iter().enumerate() {
            row_logs[g] = log_w + log_density_chol(x, &model.means[g], chol, &mut scratch);
        }
        let lse = log_sum_exp(&row_logs);
        loglik += lse;
        let out = z.row_mut(i);
        let mut total = 0.0;
        for g in 0..g_count {
            let v = (row_logs[g] - lse).exp();
            out[g] = v;
            total += v;
        }
        // renormalize away the last ulp of rounding
        for v in out.iter_mut() {
            *v /= total;
        }
    }
    Ok((Responsibilities::from_normalized(z), loglik))
}
