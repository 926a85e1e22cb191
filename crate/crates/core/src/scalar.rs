//! The scalar abstraction shared by symbolic and numeric tensor algebra.

use std::collections::HashMap;
use std::fmt::Debug;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::expr::Expr;
use crate::jet::{Jet, JetSpace};

/// Commutative field operations plus coordinate derivatives.
///
/// `Ctx` carries what a bare constant needs: nothing for `f64`, the jet space
/// for [`Jet`], the coordinate symbols for [`Expr`].
pub trait Scalar: Clone + Send + Sync + Debug {
    type Ctx: Clone + Send + Sync + Debug;

    fn constant(ctx: &Self::Ctx, v: f64) -> Self;
    fn ratio(ctx: &Self::Ctx, p: i64, q: i64) -> Self {
        Self::constant(ctx, p as f64 / q as f64)
    }
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    fn recip(&self) -> Self;
    fn sqrt(&self) -> Self;
    fn ln(&self) -> Self;
    fn exp(&self) -> Self;
    /// Structural zero; used only to skip work.
    fn is_zero(&self) -> bool;
    /// `∂/∂x^i`.
    fn partial(&self, ctx: &Self::Ctx, i: usize) -> Self;
    /// Numeric value used for pivot choice and sign decisions, if known.
    fn approx(&self) -> Option<f64>;

    fn scale(&self, ctx: &Self::Ctx, v: f64) -> Self {
        self.mul(&Self::constant(ctx, v))
    }

    fn det(ctx: &Self::Ctx, m: &[Vec<Self>]) -> Self {
        laplace_det(ctx, m)
    }

    /// Inverse matrix, `None` when singular.
    fn invert(ctx: &Self::Ctx, m: &[Vec<Self>]) -> Option<Vec<Vec<Self>>> {
        cofactor_inverse(ctx, m)
    }
}

/// Determinant by Laplace expansion along rows, memoized over column subsets.
fn laplace_det<S: Scalar>(ctx: &S::Ctx, m: &[Vec<S>]) -> S {
    let n = m.len();
    let mut memo: HashMap<u64, S> = HashMap::new();
    fn rec<S: Scalar>(ctx: &S::Ctx, m: &[Vec<S>], row: usize, cols: u64, memo: &mut HashMap<u64, S>) -> S {
        if row == m.len() {
            return S::constant(ctx, 1.0);
        }
        if let Some(v) = memo.get(&cols) {
            return v.clone();
        }
        let mut acc = S::constant(ctx, 0.0);
        let mut sign_pos = true;
        for c in 0..m.len() {
            if cols & (1 << c) != 0 {
                continue;
            }
            if !m[row][c].is_zero() {
                let minor = rec(ctx, m, row + 1, cols | (1 << c), memo);
                if !minor.is_zero() {
                    let t = m[row][c].mul(&minor);
                    acc = if sign_pos { acc.add(&t) } else { acc.sub(&t) };
                }
            }
            sign_pos = !sign_pos;
        }
        memo.insert(cols, acc.clone());
        acc
    }
    assert!(n <= 63, "matrix too large for Laplace expansion");
    rec(ctx, m, 0, 0, &mut memo)
}

fn minor<S: Clone>(m: &[Vec<S>], skip_r: usize, skip_c: usize) -> Vec<Vec<S>> {
    m.iter()
        .enumerate()
        .filter(|(r, _)| *r != skip_r)
        .map(|(_, row)| row.iter().enumerate().filter(|(c, _)| *c != skip_c).map(|(_, v)| v.clone()).collect())
        .collect()
}

/// Adjugate matrix by cofactors.
pub fn adjugate<S: Scalar>(ctx: &S::Ctx, m: &[Vec<S>]) -> Vec<Vec<S>> {
    let n = m.len();
    if n == 1 {
        return vec![vec![S::constant(ctx, 1.0)]];
    }
    let mut adj = vec![vec![S::constant(ctx, 0.0); n]; n];
    for (i, row) in adj.iter_mut().enumerate() {
        for (j, slot) in row.iter_mut().enumerate() {
            // adj_ij = (-1)^{i+j} det(minor without row j, col i)
            let d = S::det(ctx, &minor(m, j, i));
            *slot = if (i + j) % 2 == 0 { d } else { d.neg() };
        }
    }
    adj
}

fn cofactor_inverse<S: Scalar>(ctx: &S::Ctx, m: &[Vec<S>]) -> Option<Vec<Vec<S>>> {
    let d = S::det(ctx, m);
    if d.is_zero() || d.approx() == Some(0.0) {
        return None;
    }
    let inv = d.recip();
    Some(adjugate(ctx, m).into_iter().map(|row| row.into_iter().map(|v| v.mul(&inv)).collect()).collect())
}

impl Scalar for f64 {
    type Ctx = ();
    fn constant(_: &(), v: f64) -> f64 {
        v
    }
    fn add(&self, o: &f64) -> f64 {
        self + o
    }
    fn sub(&self, o: &f64) -> f64 {
        self - o
    }
    fn mul(&self, o: &f64) -> f64 {
        self * o
    }
    fn neg(&self) -> f64 {
        -self
    }
    fn recip(&self) -> f64 {
        1.0 / self
    }
    fn sqrt(&self) -> f64 {
        f64::sqrt(*self)
    }
    fn ln(&self) -> f64 {
        f64::ln(*self)
    }
    fn exp(&self) -> f64 {
        f64::exp(*self)
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn partial(&self, _: &(), _: usize) -> f64 {
        0.0
    }
    fn approx(&self) -> Option<f64> {
        Some(*self)
    }
    fn det(_: &(), m: &[Vec<f64>]) -> f64 {
        to_dmatrix(m).determinant()
    }
    fn invert(_: &(), m: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
        let inv = to_dmatrix(m).try_inverse()?;
        Some(from_dmatrix(&inv))
    }
}

pub fn to_dmatrix(m: &[Vec<f64>]) -> DMatrix<f64> {
    let n = m.len();
    let c = if n == 0 { 0 } else { m[0].len() };
    DMatrix::from_fn(n, c, |i, j| m[i][j])
}

pub fn from_dmatrix(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

impl Scalar for Jet {
    type Ctx = Arc<JetSpace>;
    fn constant(ctx: &Arc<JetSpace>, v: f64) -> Jet {
        Jet::constant(ctx, v)
    }
    fn add(&self, o: &Jet) -> Jet {
        Jet::add(self, o)
    }
    fn sub(&self, o: &Jet) -> Jet {
        Jet::sub(self, o)
    }
    fn mul(&self, o: &Jet) -> Jet {
        Jet::mul(self, o)
    }
    fn neg(&self) -> Jet {
        self.scale(-1.0)
    }
    fn recip(&self) -> Jet {
        Jet::recip(self)
    }
    fn sqrt(&self) -> Jet {
        self.powf(0.5)
    }
    fn ln(&self) -> Jet {
        Jet::ln(self)
    }
    fn exp(&self) -> Jet {
        Jet::exp(self)
    }
    fn is_zero(&self) -> bool {
        self.coeffs().iter().all(|c| *c == 0.0)
    }
    fn partial(&self, _: &Arc<JetSpace>, i: usize) -> Jet {
        Jet::partial(self, i)
    }
    fn approx(&self) -> Option<f64> {
        (self.order() >= 0).then(|| self.value())
    }
    fn scale(&self, _: &Arc<JetSpace>, v: f64) -> Jet {
        Jet::scale(self, v)
    }

    fn det(ctx: &Arc<JetSpace>, m: &[Vec<Jet>]) -> Jet {
        // Gaussian elimination, pivoting on the value part
        let n = m.len();
        let mut a: Vec<Vec<Jet>> = m.to_vec();
        let mut det = Jet::constant(ctx, 1.0);
        for k in 0..n {
            let p = (k..n)
                .max_by(|&x, &y| a[x][k].value().abs().total_cmp(&a[y][k].value().abs()))
                .unwrap();
            if a[p][k].value() == 0.0 {
                return Jet::constant(ctx, 0.0);
            }
            if p != k {
                a.swap(p, k);
                det = det.scale(-1.0);
            }
            det = det.mul(&a[k][k]);
            let inv = a[k][k].recip();
            for i in k + 1..n {
                let f = a[i][k].mul(&inv);
                for j in k + 1..n {
                    let t = f.mul(&a[k][j]);
                    a[i][j] = a[i][j].sub(&t);
                }
            }
        }
        det
    }

    fn invert(ctx: &Arc<JetSpace>, m: &[Vec<Jet>]) -> Option<Vec<Vec<Jet>>> {
        let m0: Vec<Vec<f64>> = m.iter().map(|r| r.iter().map(Jet::value).collect()).collect();
        let x0 = f64::invert(&(), &m0)?;
        let order = m.iter().flatten().map(Jet::order).min().unwrap_or(0);
        let mut x: Vec<Vec<Jet>> = x0.iter().map(|r| r.iter().map(|v| Jet::constant(ctx, *v).truncate(order)).collect()).collect();
        // Newton: X <- X (2I - M X); the error term squares each step.
        let mut steps = 0;
        while (1 << steps) <= order.max(0) {
            let mx = matmul(ctx, m, &x);
            let mut r = mx;
            for (i, row) in r.iter_mut().enumerate() {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = v.neg();
                    if i == j {
                        *v = v.add(&Jet::constant(ctx, 2.0));
                    }
                }
            }
            x = matmul(ctx, &x, &r);
            steps += 1;
        }
        Some(x)
    }
}

pub fn matmul<S: Scalar>(ctx: &S::Ctx, a: &[Vec<S>], b: &[Vec<S>]) -> Vec<Vec<S>> {
    let n = a.len();
    let k = b.len();
    let m = if k == 0 { 0 } else { b[0].len() };
    (0..n)
        .map(|i| {
            (0..m)
                .map(|j| {
                    let mut acc = S::constant(ctx, 0.0);
                    for l in 0..k {
                        if !a[i][l].is_zero() && !b[l][j].is_zero() {
                            acc = acc.add(&a[i][l].mul(&b[l][j]));
                        }
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

/// Coordinate symbols of a chart; the context for symbolic scalars.
pub type Coords = Arc<Vec<String>>;

impl Scalar for Expr {
    type Ctx = Coords;
    fn constant(_: &Coords, v: f64) -> Expr {
        Expr::from_f64(v)
    }
    fn ratio(_: &Coords, p: i64, q: i64) -> Expr {
        Expr::ratio(p, q)
    }
    fn add(&self, o: &Expr) -> Expr {
        self + o
    }
    fn sub(&self, o: &Expr) -> Expr {
        self - o
    }
    fn mul(&self, o: &Expr) -> Expr {
        self * o
    }
    fn neg(&self) -> Expr {
        -self.clone()
    }
    fn recip(&self) -> Expr {
        Expr::recip(self)
    }
    fn sqrt(&self) -> Expr {
        Expr::sqrt(self)
    }
    fn ln(&self) -> Expr {
        Expr::ln(self)
    }
    fn exp(&self) -> Expr {
        Expr::exp(self)
    }
    fn is_zero(&self) -> bool {
        Expr::is_zero(self)
    }
    fn partial(&self, ctx: &Coords, i: usize) -> Expr {
        self.diff(&ctx[i])
    }
    fn approx(&self) -> Option<f64> {
        self.to_f64()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    #[test]
    fn symbolic_inverse_of_null_block() {
        let ctx: Coords = Arc::new(vec!["u".into(), "r".into()]);
        let h = parse("-1/2 + m/r").unwrap();
        let g = vec![vec![Expr::int(2) * h.clone(), Expr::one()], vec![Expr::one(), Expr::zero()]];
        let inv = Expr::invert(&ctx, &g).unwrap();
        assert!(inv[0][0].is_zero());
        assert!(inv[0][1].is_one());
        assert_eq!(inv[1][1].simplify(), (Expr::int(-2) * h).simplify());
    }

    #[test]
    fn singular_is_rejected() {
        let m = vec![vec![1.0, 0.0], vec![0.0, 0.0]];
        assert!(f64::invert(&(), &m).is_none());
        let ctx: Coords = Arc::new(vec![]);
        let e = vec![vec![Expr::one(), Expr::zero()], vec![Expr::zero(), Expr::zero()]];
        assert!(Expr::invert(&ctx, &e).is_none());
    }

    #[test]
    fn jet_inverse_matches_numeric_derivative() {
        let s = JetSpace::get(1, 3);
        let x = Jet::variable(&s, 0, 0.4);
        let one = Jet::constant(&s, 1.0);
        let m = vec![vec![one.add(&x.mul(&x)), x.clone()], vec![x.exp(), one.scale(3.0)]];
        let inv = Jet::invert(&s, &m).unwrap();
        let prod = matmul(&s, &m, &inv);
        for (i, row) in prod.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((v.value() - target).abs() < 1e-13);
                assert!(v.coeffs()[1..].iter().all(|c| c.abs() < 1e-12), "{v:?}");
            }
        }
        let d = Jet::det(&s, &m);
        let d_direct = one.add(&x.mul(&x)).scale(3.0).sub(&x.mul(&x.exp()));
        assert!(d.sub(&d_direct).max_abs() < 1e-12);
    }
}
