use crate::constraints::Bounds;
use crate::error::Result;
use crate::family::{CovarianceFactors, CovarianceStructure, OrientKind, Orientation};
use crate::linalg::{eig_sym, quad_diag, EigenPairs, Matrix, OrthMatrix, SymMatrix};

use super::flury::{update_d_common, FluryConfig};
use super::Responsibilities;

/// Stored eigenvalues never drop below this, even when the lower bound is 0.
pub const EIGEN_FLOOR: f64 = 1e-300;

/// Weighted sufficient statistics from one set of responsibilities.
#[derive(Debug, Clone)]
pub struct GroupStats {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    /// Per-group scatter `S_g = (1/n_g) Σ_i z_ig (x_i − μ_g)(x_i − μ_g)ᵀ`.
    pub scatter: Vec<SymMatrix>,
    pub counts: Vec<f64>,
}

impl GroupStats {
    /// `Σ_g π_g S_g`.
    pub fn pooled_scatter(&self) -> SymMatrix {
        let p = self.scatter[0].dim();
        let mut w = SymMatrix::zeros(p);
        for (s, &pi) in self.scatter.iter().zip(&self.weights) {
            w.add_scaled(pi, s);
        }
        w
    }
}

/// Mixing weights, means and scatter matrices. Empty groups get a zero
/// scatter and the grand mean; degeneracy detection is expected to catch
/// them before they are used.
pub fn m_step_weights_means(data: &Matrix, r: &Responsibilities) -> GroupStats {
    let (n, p) = (data.rows(), data.cols());
    let g_count = r.groups();
    let z = r.matrix();
    let counts = r.counts().to_vec();
    let weights: Vec<f64> = counts.iter().map(|c| c / n as f64).collect();

    let grand = crate::linalg::column_means(data);
    let mut means = vec![vec![0.0; p]; g_count];
    for i in 0..n {
        let x = data.row(i);
        for (g, mean) in means.iter_mut().enumerate() {
            let w = z[(i, g)];
            if w != 0.0 {
                for (m, xv) in mean.iter_mut().zip(x) {
                    *m += w * xv;
                }
            }
        }
    }
    for (mean, &c) in means.iter_mut().zip(&counts) {
        if c > 0.0 {
            mean.iter_mut().for_each(|m| *m /= c);
        } else {
            mean.clone_from(&grand);
        }
    }

    let mut scatter = Vec::with_capacity(g_count);
    let mut dev = vec![0.0; p];
    for g in 0..g_count {
        let mut s = Matrix::zeros(p, p);
        if counts[g] > 0.0 {
            for i in 0..n {
                let w = z[(i, g)];
                if w == 0.0 {
                    continue;
                }
                for (d, (xv, m)) in dev.iter_mut().zip(data.row(i).iter().zip(&means[g])) {
                    *d = xv - m;
                }
                for a in 0..p {
                    let wa = w * dev[a];
                    for b in a..p {
                        s[(a, b)] += wa * dev[b];
                    }
                }
            }
            for a in 0..p {
                for b in a..p {
                    let v = s[(a, b)] / counts[g];
                    s[(a, b)] = v;
                    s[(b, a)] = v;
                }
            }
        }
        scatter.push(SymMatrix::from_matrix(s).expect("square"));
    }
    GroupStats { weights, means, scatter, counts }
}

#[inline]
fn clamp_floor(v: f64, bounds: Bounds) -> f64 {
    bounds.clamp(v).max(EIGEN_FLOOR)
}

fn orient_or_identity(d: Option<&OrthMatrix>, p: usize) -> OrthMatrix {
    d.cloned().unwrap_or_else(|| OrthMatrix::identity(p))
}

/// `clamp(diag(D_gᵀ S_g D_g))` for each group.
pub fn update_b_varying(scatter: &[SymMatrix], orients: &[OrthMatrix], bounds: Bounds) -> Vec<Vec<f64>> {
    candidate_b_varying(scatter, orients)
        .into_iter()
        .map(|v| v.into_iter().map(|x| clamp_floor(x, bounds)).collect())
        .collect()
}

/// `clamp(diag(Σ_g π_g D_gᵀ S_g D_g))`.
pub fn update_b_common(
    scatter: &[SymMatrix],
    orients: &[OrthMatrix],
    weights: &[f64],
    bounds: Bounds,
) -> Vec<f64> {
    candidate_b_common(scatter, orients, weights).into_iter().map(|x| clamp_floor(x, bounds)).collect()
}

fn candidate_b_varying(scatter: &[SymMatrix], orients: &[OrthMatrix]) -> Vec<Vec<f64>> {
    scatter
        .iter()
        .zip(orients)
        .map(|(s, d)| quad_diag(d, s).expect("dimensions agree"))
        .collect()
}

fn candidate_b_common(scatter: &[SymMatrix], orients: &[OrthMatrix], weights: &[f64]) -> Vec<f64> {
    let p = scatter[0].dim();
    let mut v = vec![0.0; p];
    for ((s, d), &pi) in scatter.iter().zip(orients).zip(weights) {
        for (acc, x) in v.iter_mut().zip(quad_diag(d, s).expect("dimensions agree")) {
            *acc += pi * x;
        }
    }
    v
}

/// Eigenvectors of `S_g`, columns in descending eigenvalue order.
pub fn update_d_varying(s: &SymMatrix) -> Result<OrthMatrix> {
    Ok(eig_sym(s)?.vectors)
}

/// Orders the (descending) eigenvectors so the largest eigenvalue direction is
/// paired with the largest entry of `b`. This is the orientation that
/// maximizes the likelihood for fixed `b`; when `b` is non-increasing it is the
/// plain descending order.
fn align_to(eig: &EigenPairs, b: Option<&[f64]>) -> OrthMatrix {
    let Some(b) = b else { return eig.vectors.clone() };
    let mut rank: Vec<usize> = (0..b.len()).collect();
    rank.sort_by(|&i, &j| b[j].total_cmp(&b[i]));
    if rank.iter().enumerate().all(|(k, &r)| k == r) {
        return eig.vectors.clone();
    }
    // column rank[r] receives eigenvector r
    let mut perm = vec![0; b.len()];
    for (r, &col) in rank.iter().enumerate() {
        perm[col] = r;
    }
    eig.vectors.permute_columns(&perm)
}

/// Result of a covariance M-step.
#[derive(Debug, Clone)]
pub struct CovarianceUpdate {
    pub factors: CovarianceFactors,
    /// Smallest eigenvalue candidate before clamping in the final B update.
    pub min_candidate: f64,
    pub flury_budget_exhausted: bool,
}

fn min_of(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(f64::INFINITY, f64::min)
}

/// Alternating conditional maximization of the covariance factors: the
/// orientation given the eigenvalues, then the eigenvalues given the
/// orientation, `inner_m` times. With previous factors the alternation starts
/// from them; otherwise the orientation is initialized from the scatter
/// matrices.
pub fn m_step_covariance(
    structure: CovarianceStructure,
    stats: &GroupStats,
    prev: Option<&CovarianceFactors>,
    bounds: Bounds,
    inner_m: usize,
    flury: &FluryConfig,
) -> Result<CovarianceUpdate> {
    use CovarianceStructure::*;
    let g_count = stats.scatter.len();
    let p = stats.scatter[0].dim();
    let prev = prev.filter(|f| f.structure() == structure && f.groups() == g_count && f.dim() == p);
    let inner_m = inner_m.max(1);

    match structure.orient_kind() {
        OrientKind::Spherical | OrientKind::AxisAligned => {
            let ids = vec![OrthMatrix::identity(p); g_count];
            let (eigvals, min_candidate) = match structure {
                OneI | EI => {
                    let v = candidate_b_common(&stats.scatter, &ids, &stats.weights);
                    if structure == OneI {
                        let scalar = v.iter().sum::<f64>() / p as f64;
                        (vec![vec![clamp_floor(scalar, bounds)]], scalar)
                    } else {
                        let m = min_of(v.iter().copied());
                        (vec![v.into_iter().map(|x| clamp_floor(x, bounds)).collect()], m)
                    }
                }
                GI | VI => {
                    let vs = candidate_b_varying(&stats.scatter, &ids);
                    if structure == GI {
                        let scalars: Vec<f64> = vs.iter().map(|v| v.iter().sum::<f64>() / p as f64).collect();
                        let m = min_of(scalars.iter().copied());
                        (scalars.into_iter().map(|s| vec![clamp_floor(s, bounds)]).collect(), m)
                    } else {
                        let m = min_of(vs.iter().flatten().copied());
                        let b = vs
                            .into_iter()
                            .map(|v| v.into_iter().map(|x| clamp_floor(x, bounds)).collect())
                            .collect();
                        (b, m)
                    }
                }
                _ => unreachable!(),
            };
            let factors = CovarianceFactors::new(structure, g_count, p, eigvals, Orientation::Identity)?;
            Ok(CovarianceUpdate { factors, min_candidate, flury_budget_exhausted: false })
        }

        OrientKind::Varying => {
            let eigs: Vec<EigenPairs> = stats.scatter.iter().map(eig_sym).collect::<Result<_>>()?;
            let shared = structure == EV;
            let mut b: Option<Vec<Vec<f64>>> = prev.map(|f| f.stored_eigvals().to_vec());
            let mut orients = Vec::new();
            let mut min_candidate = f64::INFINITY;
            for _ in 0..inner_m {
                orients = eigs
                    .iter()
                    .enumerate()
                    .map(|(g, e)| {
                        let bg = b.as_ref().map(|b| if shared { b[0].as_slice() } else { b[g].as_slice() });
                        align_to(e, bg)
                    })
                    .collect();
                if shared {
                    let v = candidate_b_common(&stats.scatter, &orients, &stats.weights);
                    min_candidate = min_of(v.iter().copied());
                    b = Some(vec![v.into_iter().map(|x| clamp_floor(x, bounds)).collect()]);
                } else {
                    let vs = candidate_b_varying(&stats.scatter, &orients);
                    min_candidate = min_of(vs.iter().flatten().copied());
                    b = Some(
                        vs.into_iter()
                            .map(|v| v.into_iter().map(|x| clamp_floor(x, bounds)).collect())
                            .collect(),
                    );
                }
            }
            let factors = CovarianceFactors::new(
                structure,
                g_count,
                p,
                b.expect("inner_m >= 1"),
                Orientation::PerGroup(orients),
            )?;
            Ok(CovarianceUpdate { factors, min_candidate, flury_budget_exhausted: false })
        }

        OrientKind::Shared if structure == EE => {
            // With one eigenvalue set the common-orientation objective is
            // tr(B⁻¹ Dᵀ W D), minimized by the eigenvectors of W = Σ π_g S_g.
            let pooled = stats.pooled_scatter();
            let eig = eig_sym(&pooled)?;
            let mut b: Option<Vec<f64>> = prev.map(|f| f.stored_eigvals()[0].clone());
            let mut d = eig.vectors.clone();
            let mut min_candidate = f64::INFINITY;
            for _ in 0..inner_m {
                d = align_to(&eig, b.as_deref());
                let v = quad_diag(&d, &pooled)?;
                min_candidate = min_of(v.iter().copied());
                b = Some(v.into_iter().map(|x| clamp_floor(x, bounds)).collect());
            }
            let factors =
                CovarianceFactors::new(structure, g_count, p, vec![b.expect("inner_m >= 1")], Orientation::Shared(d))?;
            Ok(CovarianceUpdate { factors, min_candidate, flury_budget_exhausted: false })
        }

        OrientKind::Shared => {
            // VE: varying eigenvalues, one orientation shared by all groups.
            let (mut d, mut b) = match prev {
                Some(f) => (
                    orient_or_identity(f.orient(0), p),
                    f.stored_eigvals().to_vec(),
                ),
                None => {
                    let d0 = eig_sym(&stats.pooled_scatter())?.vectors;
                    let ds = vec![d0.clone(); g_count];
                    (d0, update_b_varying(&stats.scatter, &ds, bounds))
                }
            };
            let mut min_candidate = f64::INFINITY;
            let mut exhausted = false;
            for _ in 0..inner_m {
                let out = update_d_common(&stats.scatter, &stats.counts, &b, &d, flury);
                exhausted |= out.budget_exhausted;
                d = out.orientation;
                let ds = vec![d.clone(); g_count];
                let vs = candidate_b_varying(&stats.scatter, &ds);
                min_candidate = min_of(vs.iter().flatten().copied());
                b = vs.into_iter().map(|v| v.into_iter().map(|x| clamp_floor(x, bounds)).collect()).collect();
            }
            let factors = CovarianceFactors::new(structure, g_count, p, b, Orientation::Shared(d))?;
            Ok(CovarianceUpdate { factors, min_candidate, flury_budget_exhausted: exhausted })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::reconstruct;

    fn hard(labels: &[usize], g: usize) -> Responsibilities {
        Responsibilities::from_labels(labels, g).unwrap()
    }

    #[test]
    fn three_point_example() {
        let data = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        let st = m_step_weights_means(&data, &hard(&[0, 0, 1], 2));
        assert!((st.weights[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((st.weights[1] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(st.means, vec![vec![0.5], vec![2.0]]);
        assert!((st.scatter[0][(0, 0)] - 0.25).abs() < 1e-15);
        assert_eq!(st.scatter[1][(0, 0)], 0.0);
    }

    #[test]
    fn uniform_responsibilities_give_total_scatter() {
        let data = Matrix::from_rows(&[vec![0.0, 1.0], vec![2.0, 0.0], vec![4.0, 5.0], vec![1.0, 1.0]]).unwrap();
        let z = Matrix::from_fn(4, 3, |_, _| 1.0 / 3.0);
        let st = m_step_weights_means(&data, &Responsibilities::new(z).unwrap());
        let grand = crate::linalg::column_means(&data);
        let total = m_step_weights_means(&data, &hard(&[0, 0, 0, 0], 1));
        for g in 0..3 {
            for (a, b) in st.means[g].iter().zip(&grand) {
                assert!((a - b).abs() < 1e-12);
            }
            assert!(st.scatter[g].as_matrix().max_abs_diff(total.scatter[0].as_matrix()) < 1e-12);
        }
    }

    #[test]
    fn b_varying_examples() {
        let b = Bounds::new(1.0, 3.0).unwrap();
        let out = update_b_varying(&[SymMatrix::diag(&[2.0, 5.0])], &[OrthMatrix::identity(2)], b);
        assert_eq!(out, vec![vec![2.0, 3.0]]);

        let s = SymMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let e = eig_sym(&s).unwrap();
        let out = update_b_varying(&[s], &[e.vectors], Bounds::VACUOUS);
        assert!((out[0][0] - 3.0).abs() < 1e-12 && (out[0][1] - 1.0).abs() < 1e-12);

        let r = OrthMatrix::rotation2(std::f64::consts::FRAC_PI_4);
        let out = update_b_varying(&[SymMatrix::diag(&[4.0, 0.0])], &[r], Bounds::new(0.1, 10.0).unwrap());
        assert!((out[0][0] - 2.0).abs() < 1e-12 && (out[0][1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn b_common_examples() {
        let ids = vec![OrthMatrix::identity(2); 2];
        let s = vec![SymMatrix::diag(&[1.0, 3.0]), SymMatrix::diag(&[3.0, 1.0])];
        assert_eq!(update_b_common(&s, &ids, &[0.5, 0.5], Bounds::VACUOUS), vec![2.0, 2.0]);
        assert_eq!(update_b_common(&s, &ids, &[0.5, 0.5], Bounds::new(0.0, 1.5).unwrap()), vec![1.5, 1.5]);
        // one group: same as the varying update
        let one = update_b_common(&s[..1], &ids[..1], &[1.0], Bounds::VACUOUS);
        assert_eq!(vec![one], update_b_varying(&s[..1], &ids[..1], Bounds::VACUOUS));
    }

    #[test]
    fn d_varying_examples() {
        let d = update_d_varying(&SymMatrix::diag(&[5.0, 2.0, 1.0])).unwrap();
        assert_eq!(d.as_matrix(), &Matrix::identity(3));
        let d = update_d_varying(&SymMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap()).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let m = d.as_matrix();
        assert!((m[(0, 0)] - h).abs() < 1e-12 && (m[(1, 0)] - h).abs() < 1e-12);
        assert!((m[(0, 1)].abs() - h).abs() < 1e-12 && (m[(0, 1)] + m[(1, 1)]).abs() < 1e-12);
        // repeated eigenvalues: any basis, judged by reconstruction
        let s = SymMatrix::diag(&[2.0, 2.0, 1.0]);
        let d = update_d_varying(&s).unwrap();
        assert!(reconstruct(&d, &[2.0, 2.0, 1.0]).as_matrix().max_abs_diff(s.as_matrix()) < 1e-12);
    }

    #[test]
    fn alignment_follows_b_order() {
        let e = eig_sym(&SymMatrix::diag(&[1.0, 5.0])).unwrap();
        let d = align_to(&e, Some(&[1.0, 3.0]));
        // column 1 has the larger b, so it gets the larger eigen-direction (axis 1)
        assert_eq!(d.as_matrix(), &Matrix::identity(2));
    }

    fn stats_for(data: &Matrix, labels: &[usize], g: usize) -> GroupStats {
        m_step_weights_means(data, &hard(labels, g))
    }

    fn toy_data() -> (Matrix, Vec<usize>) {
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| {
                let t = i as f64;
                vec![(t * 0.37).sin() * 3.0 + (i % 2) as f64 * 6.0, (t * 0.91).cos() + 0.2 * t.sqrt(), (t * 1.7).sin()]
            })
            .collect();
        let labels = (0..40).map(|i| i % 2).collect();
        (Matrix::from_rows(&rows).unwrap(), labels)
    }

    #[test]
    fn unconstrained_vv_reproduces_scatter() {
        let (data, labels) = toy_data();
        let st = stats_for(&data, &labels, 2);
        let up = m_step_covariance(CovarianceStructure::VV, &st, None, Bounds::VACUOUS, 1, &FluryConfig::default()).unwrap();
        for g in 0..2 {
            assert!(up.factors.assemble_sigma(g).as_matrix().frobenius_diff(st.scatter[g].as_matrix()) < 1e-10);
        }
    }

    #[test]
    fn unconstrained_spherical_is_trace_over_p() {
        let (data, labels) = toy_data();
        let st = stats_for(&data, &labels, 2);
        let up = m_step_covariance(CovarianceStructure::OneI, &st, None, Bounds::VACUOUS, 1, &FluryConfig::default()).unwrap();
        let expect = st.pooled_scatter().trace() / 3.0;
        assert!((up.factors.eigvals(0)[0] - expect).abs() < 1e-12);

        // direct check: the 1I M-step objective Σ_g n_g (p ln λ + tr(S_g)/λ)
        // is minimized at the returned scalar
        let obj = |lam: f64| -> f64 {
            st.scatter.iter().zip(&st.counts).map(|(s, n)| n * (3.0 * lam.ln() + s.trace() / lam)).sum()
        };
        let lam = up.factors.eigvals(0)[0];
        for step in [1e-3, -1e-3, 0.1, -0.1] {
            assert!(obj(lam) <= obj(lam + step));
        }
    }

    #[test]
    fn unconstrained_ee_is_pooled_eigendecomposition() {
        let (data, labels) = toy_data();
        let st = stats_for(&data, &labels, 2);
        let up = m_step_covariance(CovarianceStructure::EE, &st, None, Bounds::VACUOUS, 1, &FluryConfig::default()).unwrap();
        let pooled = st.pooled_scatter();
        for g in 0..2 {
            assert!(up.factors.assemble_sigma(g).as_matrix().frobenius_diff(pooled.as_matrix()) < 1e-10);
        }
    }

    #[test]
    fn every_structure_respects_bounds() {
        let (data, labels) = toy_data();
        let st = stats_for(&data, &labels, 2);
        let bounds = Bounds::new(0.5, 2.0).unwrap();
        for tag in CovarianceStructure::ALL {
            let mut prev = None;
            for _ in 0..3 {
                let up = m_step_covariance(tag, &st, prev.as_ref(), bounds, 2, &FluryConfig::default()).unwrap();
                for g in 0..2 {
                    let ev = eig_sym(&up.factors.assemble_sigma(g)).unwrap().values;
                    assert!(ev.iter().all(|&x| (0.5 - 1e-9..=2.0 + 1e-9).contains(&x)), "{tag}: {ev:?}");
                }
                prev = Some(up.factors);
            }
        }
    }
}
