//! Small dense kernels: SVD adjugates (with first-order jets), and rank and
//! null space by full-pivot elimination.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::expr::Expr;
use crate::jet::{Jet, JetSpace};
use crate::scalar::{to_dmatrix, Scalar};

/// Scalars with a determinant and adjugate that stay defined on singular
/// matrices. Jets come back truncated to first order.
pub trait Adjugate: Scalar {
    fn det_adjugate(ctx: &Self::Ctx, m: &[Vec<Self>]) -> (Self, Vec<Vec<Self>>);
}

impl Adjugate for f64 {
    fn det_adjugate(_: &(), m: &[Vec<f64>]) -> (f64, Vec<Vec<f64>>) {
        let d = to_dmatrix(m);
        let adj = adjugate(&d);
        (d.determinant(), (0..m.len()).map(|i| (0..m.len()).map(|j| adj[(i, j)]).collect()).collect())
    }
}

impl Adjugate for Jet {
    fn det_adjugate(_: &Arc<JetSpace>, m: &[Vec<Jet>]) -> (Jet, Vec<Vec<Jet>>) {
        det_adjugate_jet(m)
    }
}

impl Adjugate for Expr {
    fn det_adjugate(ctx: &crate::scalar::Coords, m: &[Vec<Expr>]) -> (Expr, Vec<Vec<Expr>>) {
        (Expr::det(ctx, m), crate::scalar::adjugate(ctx, m))
    }
}

/// `adj(M)` from `M = UΣVᵀ` as `det U det V · V adj(Σ) Uᵀ`; exact in the
/// singular case, where `adj(Σ)` keeps products of the other singular values.
pub fn adjugate(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (u, s, vt) = svd(m);
    let adj_s = DMatrix::from_diagonal(&DVector::from_iterator(s.len(), (0..s.len()).map(|i| prod_except(&s, &[i]))));
    orientation(&u, &vt) * vt.transpose() * adj_s * u.transpose()
}

fn svd(m: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    let svd = m.clone().svd(true, true);
    (svd.u.expect("u requested"), svd.singular_values, svd.v_t.expect("v requested"))
}

fn orientation(u: &DMatrix<f64>, vt: &DMatrix<f64>) -> f64 {
    let du = u.determinant();
    let dv = vt.determinant();
    du.signum() * dv.signum()
}

fn prod_except(s: &DVector<f64>, skip: &[usize]) -> f64 {
    s.iter().enumerate().filter(|(k, _)| !skip.contains(k)).map(|(_, v)| *v).product()
}

/// Determinant and adjugate of a jet-valued matrix, to first order.
///
/// The derivative of `adj` along `M_i` is taken in the SVD frame of the
/// value matrix: with `S = Uᵀ M_i V`, `d adj(Σ)_jj = Σ_{k≠j} S_kk Π_{l≠j,k} σ_l`
/// and `d adj(Σ)_jk = −S_jk Π_{l≠j,k} σ_l`. Nothing is divided by a
/// singular value, so singular matrices are fine.
pub fn det_adjugate_jet(m: &[Vec<Jet>]) -> (Jet, Vec<Vec<Jet>>) {
    let n = m.len();
    let space: Arc<JetSpace> = m[0][0].space().clone();
    let order = m.iter().flatten().map(Jet::order).min().unwrap_or(0).min(1);
    let vars = space.dim();
    let value = DMatrix::from_fn(n, n, |i, j| m[i][j].value());
    let (u, s, vt) = svd(&value);
    let v = vt.transpose();
    let sign = orientation(&u, &vt);
    let adj_s = DMatrix::from_diagonal(&DVector::from_iterator(n, (0..n).map(|i| prod_except(&s, &[i]))));
    let adj0 = sign * &v * &adj_s * u.transpose();
    let det0 = sign * s.iter().product::<f64>();

    let mut det_c = vec![det0];
    let mut adj_c: Vec<Vec<Vec<f64>>> = (0..n).map(|i| (0..n).map(|j| vec![adj0[(i, j)]]).collect()).collect();
    if order >= 1 {
        for d in 0..vars {
            let mi = DMatrix::from_fn(n, n, |i, j| m[i][j].coeffs()[1 + d]);
            det_c.push((&adj0 * &mi).trace());
            let sm = u.transpose() * &mi * &v;
            let dadj_s = DMatrix::from_fn(n, n, |j, k| {
                if j == k {
                    (0..n).filter(|&l| l != j).map(|l| sm[(l, l)] * prod_except(&s, &[j, l])).sum()
                } else {
                    -sm[(j, k)] * prod_except(&s, &[j, k])
                }
            });
            let dadj = sign * &v * dadj_s * u.transpose();
            for (i, row) in adj_c.iter_mut().enumerate() {
                for (j, c) in row.iter_mut().enumerate() {
                    c.push(dadj[(i, j)]);
                }
            }
        }
    }
    let mk = |c: Vec<f64>| Jet::from_coeffs(&space, order, c);
    (mk(det_c), adj_c.into_iter().map(|r| r.into_iter().map(mk).collect()).collect())
}

/// Numerical rank and an orthonormal kernel basis.
#[derive(Clone, Debug)]
pub struct Kernel {
    pub rank: usize,
    pub cols: usize,
    pub basis: Vec<DVector<f64>>,
    /// Pivot magnitudes in elimination order.
    pub pivots: Vec<f64>,
}

impl Kernel {
    pub fn dim(&self) -> usize {
        self.cols - self.rank
    }
}

/// Full-pivot Gaussian elimination; pivots at or below `rel_tol` times the
/// largest entry of `a` count as zero.
pub fn kernel(a: &DMatrix<f64>, rel_tol: f64) -> Kernel {
    let (rows, cols) = a.shape();
    let mut m = a.clone();
    let scale = a.amax();
    let tol = rel_tol * scale;
    let mut colperm: Vec<usize> = (0..cols).collect();
    let mut pivots = Vec::new();
    let mut rank = 0;
    if scale > 0.0 {
        while rank < rows.min(cols) {
            let mut best = (rank, rank, 0.0);
            for i in rank..rows {
                for j in rank..cols {
                    let v = m[(i, j)].abs();
                    if v > best.2 {
                        best = (i, j, v);
                    }
                }
            }
            if best.2 <= tol {
                break;
            }
            m.swap_rows(rank, best.0);
            m.swap_columns(rank, best.1);
            colperm.swap(rank, best.1);
            pivots.push(best.2);
            let p = m[(rank, rank)];
            for i in 0..rows {
                if i == rank {
                    continue;
                }
                let f = m[(i, rank)] / p;
                if f != 0.0 {
                    for j in rank..cols {
                        let t = m[(rank, j)];
                        m[(i, j)] -= f * t;
                    }
                }
            }
            rank += 1;
        }
    }
    // reduced form: x_pivot = −Σ_free m[p][free]/m[p][p] x_free
    let mut basis = Vec::new();
    for free in rank..cols {
        let mut x = DVector::zeros(cols);
        x[colperm[free]] = 1.0;
        for p in 0..rank {
            x[colperm[p]] = -m[(p, free)] / m[(p, p)];
        }
        basis.push(x);
    }
    Kernel { rank, cols, basis: orthonormalize(basis), pivots }
}

fn orthonormalize(vs: Vec<DVector<f64>>) -> Vec<DVector<f64>> {
    let mut out: Vec<DVector<f64>> = Vec::new();
    for mut v in vs {
        for _ in 0..2 {
            for u in &out {
                let d = u.dot(&v);
                v -= u * d;
            }
        }
        let norm = v.norm();
        if norm > 0.0 {
            out.push(v / norm);
        }
    }
    out
}

/// Distance of a unit-normalized `v` from the span of an orthonormal basis.
pub fn distance_from_span(v: &DVector<f64>, basis: &[DVector<f64>]) -> f64 {
    let nv = v.norm();
    if nv == 0.0 {
        return 0.0;
    }
    let mut r = v / nv;
    for u in basis {
        let d = u.dot(&r);
        r -= u * d;
    }
    r.norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Scalar;

    fn cofactor(m: &DMatrix<f64>) -> DMatrix<f64> {
        let rows: Vec<Vec<f64>> = (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect();
        let adj = crate::scalar::adjugate(&(), &rows);
        DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| adj[i][j])
    }

    #[test]
    fn svd_adjugate_matches_cofactors() {
        let m = DMatrix::from_row_slice(4, 4, &[1.0, 2.0, 0.5, -1.0, 0.3, -2.0, 1.0, 4.0, 2.0, 0.1, 3.0, 0.0, -1.0, 1.0, 1.0, 1.0]);
        assert!((adjugate(&m) - cofactor(&m)).amax() < 1e-12);
        // rank 2: adjugate vanishes
        let s = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 0.0, 1.0, 1.0]);
        assert!((adjugate(&s) - cofactor(&s)).amax() < 1e-12);
        let z = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 3.0, 6.0, 9.0]);
        assert!(adjugate(&z).amax() < 1e-12);
    }

    #[test]
    fn jet_adjugate_first_order() {
        let s = JetSpace::get(2, 2);
        let x = Jet::variable(&s, 0, 0.3);
        let y = Jet::variable(&s, 1, -0.8);
        let c = |v: f64| Jet::constant(&s, v);
        // singular at the expansion point in one direction
        let m = vec![
            vec![x.mul(&y), c(1.0), y.sin()],
            vec![c(2.0), x.exp(), c(0.0)],
            vec![x.clone(), y.mul(&y), x.add(&y)],
        ];
        let (d, adj) = det_adjugate_jet(&m);
        let d_ref = Jet::det(&s, &m);
        let adj_ref = crate::scalar::adjugate(&s, &m);
        assert_eq!(d.order(), 1);
        assert!(d.sub(&d_ref.truncate(1)).max_abs() < 1e-12);
        for i in 0..3 {
            for j in 0..3 {
                assert!(adj[i][j].sub(&adj_ref[i][j].truncate(1)).max_abs() < 1e-12);
            }
        }
    }

    #[test]
    fn kernel_of_rank_deficient() {
        let a = DMatrix::from_row_slice(3, 4, &[1.0, 2.0, 3.0, 4.0, 2.0, 4.0, 6.0, 8.0, 0.0, 1.0, 0.0, 1.0]);
        let k = kernel(&a, 1e-10);
        assert_eq!(k.rank, 2);
        assert_eq!(k.dim(), 2);
        for v in &k.basis {
            assert!((&a * v).amax() < 1e-12);
            assert!((v.norm() - 1.0).abs() < 1e-12);
        }
        let z = kernel(&DMatrix::zeros(2, 3), 1e-8);
        assert_eq!((z.rank, z.dim()), (0, 3));
    }
}
