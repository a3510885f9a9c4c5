//! Dense linear algebra kernels for small symmetric problems.
//!
//! Everything here works on row-major `Vec<f64>` storage. The matrices that
//! show up in mixture fitting are p×p with p rarely above a few dozen, so the
//! routines favour simplicity and robustness over blocking or SIMD.

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Jacobi convergence threshold, relative to the largest diagonal magnitude.
pub const JACOBI_REL_TOL: f64 = 1e-12;
/// Maximum number of cyclic Jacobi sweeps.
pub const JACOBI_MAX_SWEEPS: usize = 100;

/// Row-major dense matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch { expected: cols, found: r.len() });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: rows.len(), cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch { expected: self.cols, found: other.rows });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.data[k * other.cols + j];
                }
            }
        }
        Ok(out)
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn frobenius_diff(&self, other: &Matrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    /// Appends the rows of `other` below `self`.
    pub fn vstack(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows > 0 && other.rows > 0 && self.cols != other.cols {
            return Err(Error::DimensionMismatch { expected: self.cols, found: other.cols });
        }
        let cols = if self.rows > 0 { self.cols } else { other.cols };
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Matrix { rows: self.rows + other.rows, cols, data })
    }

    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix { rows: idx.len(), cols: self.cols, data }
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for r in self.row_iter() {
            writeln!(f, "  {r:?}")?;
        }
        write!(f, "]")
    }
}

/// Square matrix whose entries are exactly symmetric.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix(Matrix);

impl SymMatrix {
    /// Symmetrizes `m` by averaging it with its transpose so that
    /// `m[i][j] == m[j][i]` holds bit-for-bit afterwards.
    pub fn from_matrix(m: Matrix) -> Result<Self> {
        if m.rows != m.cols {
            return Err(Error::DimensionMismatch { expected: m.rows, found: m.cols });
        }
        if m.rows == 0 {
            return Err(Error::EmptyMatrix);
        }
        let n = m.rows;
        let mut s = m;
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (s[(i, j)] + s[(j, i)]);
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
        }
        Ok(Self(s))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::from_matrix(Matrix::from_rows(rows)?)
    }

    pub fn identity(n: usize) -> Self {
        Self(Matrix::identity(n))
    }

    pub fn diag(values: &[f64]) -> Self {
        Self(Matrix::diag(values))
    }

    pub fn zeros(n: usize) -> Self {
        Self(Matrix::zeros(n, n))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.rows
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.0[(i, i)]).sum()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.0[(i, i)]).collect()
    }

    /// `self + w * other`, used for weighted pooling of scatter matrices.
    pub fn add_scaled(&mut self, w: f64, other: &SymMatrix) {
        for (a, b) in self.0.data.iter_mut().zip(&other.0.data) {
            *a += w * b;
        }
    }

    pub fn scale(&mut self, w: f64) {
        for a in &mut self.0.data {
            *a *= w;
        }
    }
}

impl Index<(usize, usize)> for SymMatrix {
    type Output = f64;
    #[inline]
    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

/// Square matrix with orthonormal columns.
#[derive(Clone, Debug, PartialEq)]
pub struct OrthMatrix(Matrix);

/// Maximum deviation of QᵀQ from the identity tolerated by [`OrthMatrix::new`].
pub const ORTH_TOL: f64 = 1e-10;

impl OrthMatrix {
    pub fn new(m: Matrix) -> Result<Self> {
        if m.rows != m.cols {
            return Err(Error::DimensionMismatch { expected: m.rows, found: m.cols });
        }
        let dev = orthogonality_defect(&m);
        if dev > ORTH_TOL {
            return Err(Error::NotOrthogonal(dev));
        }
        Ok(Self(m))
    }

    pub(crate) fn new_unchecked(m: Matrix) -> Self {
        Self(m)
    }

    pub fn identity(n: usize) -> Self {
        Self(Matrix::identity(n))
    }

    /// Planar rotation by `theta` radians (p = 2).
    pub fn rotation2(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self(Matrix::from_fn(2, 2, |i, j| match (i, j) {
            (0, 0) | (1, 1) => c,
            (0, 1) => -s,
            _ => s,
        }))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.rows
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.0.column(k)
    }

    /// Returns a copy with columns reordered so that column `k` of the result
    /// is column `perm[k]` of `self`.
    pub fn permute_columns(&self, perm: &[usize]) -> Self {
        let n = self.dim();
        Self(Matrix::from_fn(n, n, |i, k| self.0[(i, perm[k])]))
    }
}

/// max |QᵀQ − I|.
pub fn orthogonality_defect(q: &Matrix) -> f64 {
    let n = q.cols;
    let mut worst = 0.0f64;
    for a in 0..n {
        for b in a..n {
            let dot: f64 = (0..q.rows).map(|i| q[(i, a)] * q[(i, b)]).sum();
            let target = if a == b { 1.0 } else { 0.0 };
            worst = worst.max((dot - target).abs());
        }
    }
    worst
}

/// Eigenvalues (descending) paired with the columns of an orthonormal matrix.
#[derive(Clone, Debug)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: OrthMatrix,
}

impl EigenPairs {
    /// V · diag(values) · Vᵀ
    pub fn reconstruct(&self) -> SymMatrix {
        reconstruct(&self.vectors, &self.values)
    }
}

/// Q · diag(values) · Qᵀ, exactly symmetric.
pub fn reconstruct(q: &OrthMatrix, values: &[f64]) -> SymMatrix {
    let n = q.dim();
    let qm = q.as_matrix();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v: f64 = (0..n).map(|k| qm[(i, k)] * values[k] * qm[(j, k)]).sum();
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    SymMatrix(out)
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Converges when the largest off-diagonal magnitude falls below
/// [`JACOBI_REL_TOL`] times the largest diagonal magnitude. Eigenpairs are
/// sorted by descending eigenvalue and each eigenvector is oriented so that
/// its largest-magnitude component is positive.
pub fn eig_sym(m: &SymMatrix) -> Result<EigenPairs> {
    let n = m.dim();
    let mut a = m.as_matrix().clone();
    let mut v = Matrix::identity(n);

    let off_max = |a: &Matrix| {
        let mut off = 0.0f64;
        let mut diag = 0.0f64;
        for i in 0..n {
            diag = diag.max(a[(i, i)].abs());
            for j in (i + 1)..n {
                off = off.max(a[(i, j)].abs());
            }
        }
        (off, diag)
    };

    let mut converged = false;
    for _sweep in 0..=JACOBI_MAX_SWEEPS {
        let (off, diag) = off_max(&a);
        if off == 0.0 || off < JACOBI_REL_TOL * diag {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;

                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        let (off, _) = off_max(&a);
        return Err(Error::EigenNotConverged { residual: off });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));
    let values: Vec<f64> = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = Matrix::from_fn(n, n, |i, k| v[(i, order[k])]);
    normalize_column_signs(&mut vectors);
    Ok(EigenPairs { values, vectors: OrthMatrix(vectors) })
}

/// Flips each column so its largest-magnitude entry is positive.
pub(crate) fn normalize_column_signs(m: &mut Matrix) {
    for k in 0..m.cols {
        let mut best = 0.0f64;
        let mut sign = 1.0;
        for i in 0..m.rows {
            let x = m[(i, k)];
            if x.abs() > best {
                best = x.abs();
                sign = x.signum();
            }
        }
        if sign < 0.0 {
            for i in 0..m.rows {
                m[(i, k)] = -m[(i, k)];
            }
        }
    }
}

/// Lower-triangular Cholesky factor.
#[derive(Clone, Debug)]
pub struct Cholesky {
    l: Matrix,
}

impl Cholesky {
    pub fn factor(&self) -> &Matrix {
        &self.l
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.l.rows).map(|i| self.l[(i, i)].ln()).sum::<f64>()
    }

    /// Solves L y = b in place.
    pub fn solve_lower_in_place(&self, b: &mut [f64]) {
        let n = self.l.rows;
        for i in 0..n {
            let row = self.l.row(i);
            let mut acc = b[i];
            for k in 0..i {
                acc -= row[k] * b[k];
            }
            b[i] = acc / row[i];
        }
    }

    /// (x − μ)ᵀ Σ⁻¹ (x − μ) via one triangular solve.
    pub fn mahalanobis_sq(&self, x: &[f64], mean: &[f64], scratch: &mut Vec<f64>) -> f64 {
        scratch.clear();
        scratch.extend(x.iter().zip(mean).map(|(a, b)| a - b));
        self.solve_lower_in_place(scratch);
        scratch.iter().map(|y| y * y).sum()
    }
}

/// Cholesky factorization `m = L Lᵀ`. Fails with the 1-based order of the
/// first leading minor that is not positive.
pub fn cholesky(m: &SymMatrix) -> Result<Cholesky> {
    let n = m.dim();
    let a = m.as_matrix();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite { minor: j + 1 });
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(Cholesky { l })
}

/// diag(Qᵀ S Q): the variance of S along each column of Q.
pub fn quad_diag(q: &OrthMatrix, s: &SymMatrix) -> Result<Vec<f64>> {
    let n = q.dim();
    if s.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, found: s.dim() });
    }
    let qm = q.as_matrix();
    let sm = s.as_matrix();
    let mut out = vec![0.0; n];
    let mut sq = vec![0.0; n];
    for (k, o) in out.iter_mut().enumerate() {
        for i in 0..n {
            sq[i] = (0..n).map(|j| sm[(i, j)] * qm[(j, k)]).sum();
        }
        *o = (0..n).map(|i| qm[(i, k)] * sq[i]).sum();
    }
    Ok(out)
}

/// Qᵀ S Q as a full symmetric matrix.
pub fn congruence(q: &OrthMatrix, s: &SymMatrix) -> Result<SymMatrix> {
    let qm = q.as_matrix();
    let t = qm.transpose().matmul(s.as_matrix())?.matmul(qm)?;
    SymMatrix::from_matrix(t)
}

/// Sample covariance with the n−1 denominator.
pub fn sample_covariance(data: &Matrix) -> Result<SymMatrix> {
    let n = data.rows();
    let p = data.cols();
    if n < 2 {
        return Err(Error::TooFewObservations { n, needed: 2 });
    }
    let mean = column_means(data);
    let mut s = Matrix::zeros(p, p);
    for row in data.row_iter() {
        for i in 0..p {
            let di = row[i] - mean[i];
            for j in i..p {
                s[(i, j)] += di * (row[j] - mean[j]);
            }
        }
    }
    let denom = (n - 1) as f64;
    for i in 0..p {
        for j in i..p {
            let v = s[(i, j)] / denom;
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    SymMatrix::from_matrix(s)
}

pub fn column_means(data: &Matrix) -> Vec<f64> {
    let n = data.rows().max(1) as f64;
    let mut mean = vec![0.0; data.cols()];
    for row in data.row_iter() {
        for (m, x) in mean.iter_mut().zip(row) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    mean
}
