//! The Weyl tensor as a linear map: on vectors, on 2-forms and on
//! symmetric tensors, and the dual tensors `D̃` built from it.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curvature::{CurvaturePack, Tolerances};
use crate::geometry::{multi_indices, permutation_sign, Slot, Tensor};
use crate::jet::Jet;
use crate::linalg::{kernel, Adjugate};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenericityError {
    #[error("policy {policy} needs {what} at {point} (value {value:e})")]
    Precondition { policy: Policy, what: &'static str, point: String, value: f64 },
    #[error("policy dim4-C3 needs dimension 4, got {0}")]
    Dimension(usize),
    #[error("dual candidate fails its defining contraction by {0:e}")]
    NotDual(f64),
}

/// Ordered basis `e_i ∧ e_j`, `i < j`, of `Λ²`.
pub fn lambda2_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
}

/// `C_ab^cd`.
pub fn weyl_down_up<S: Scalar>(pack: &CurvaturePack<S>) -> Tensor<S> {
    let lc = &pack.lc;
    lc.raise(&lc.raise(&pack.weyl, 2).expect("lower"), 3).expect("lower")
}

/// `C^abcd`.
pub fn weyl_up<S: Scalar>(pack: &CurvaturePack<S>) -> Tensor<S> {
    let lc = &pack.lc;
    lc.with_slots(&pack.weyl, &[Slot::Up; 4]).expect("rank 4")
}

/// The map `W_ab ↦ C_ab^cd W_cd` on 2-forms, its determinant `‖C‖` and
/// the adjugate reshaped to `C̃_ef^ab`.
#[derive(Clone, Debug)]
pub struct WeylOperator<S: Scalar> {
    pub matrix: Vec<Vec<S>>,
    pub det: S,
    /// `C̃_ef^ab`, skew in each pair.
    pub tilde: Tensor<S>,
}

impl<S: Adjugate> WeylOperator<S> {
    pub fn new(pack: &CurvaturePack<S>) -> WeylOperator<S> {
        Self::from_down_up(pack.ctx(), &weyl_down_up(pack))
    }

    pub fn from_down_up(ctx: &S::Ctx, c: &Tensor<S>) -> WeylOperator<S> {
        let n = c.dim;
        let pairs = lambda2_pairs(n);
        let matrix: Vec<Vec<S>> =
            pairs.iter().map(|&(a, b)| pairs.iter().map(|&(p, q)| c.get(&[a, b, p, q]).scale(ctx, 2.0)).collect()).collect();
        let (det, adj) = S::det_adjugate(ctx, &matrix);
        let mut pos = vec![vec![None; n]; n];
        for (k, &(i, j)) in pairs.iter().enumerate() {
            pos[i][j] = Some((k, false));
            pos[j][i] = Some((k, true));
        }
        let zero = S::constant(ctx, 0.0);
        let tilde = Tensor::from_fn(n, vec![Slot::Down, Slot::Down, Slot::Up, Slot::Up], -2 * (pairs.len() as i32 - 1), |i| {
            match (pos[i[0]][i[1]], pos[i[2]][i[3]]) {
                (Some((r, f1)), Some((s, f2))) => {
                    let v = adj[r][s].scale(ctx, 0.5);
                    if f1 != f2 {
                        v.neg()
                    } else {
                        v
                    }
                }
                _ => zero.clone(),
            }
        });
        WeylOperator { matrix, det, tilde }
    }
}

/// `L^a_b = C^acde C_bcde` with determinant and adjugate.
#[derive(Clone, Debug)]
pub struct LOperator<S: Scalar> {
    pub matrix: Vec<Vec<S>>,
    pub det: S,
    pub adjugate: Vec<Vec<S>>,
}

impl<S: Adjugate> LOperator<S> {
    pub fn new(pack: &CurvaturePack<S>) -> LOperator<S> {
        let n = pack.dim();
        let ctx = pack.ctx();
        let lc = &pack.lc;
        let cu = lc.raise(&pack.weyl, 0).expect("lower");
        let cd = lc.with_slots(&pack.weyl, &[Slot::Down, Slot::Up, Slot::Up, Slot::Up]).expect("rank 4");
        let idx: Vec<Vec<usize>> = multi_indices(n, 3).collect();
        let matrix: Vec<Vec<S>> = (0..n)
            .map(|a| {
                (0..n)
                    .map(|b| {
                        let mut acc = S::constant(ctx, 0.0);
                        for i in &idx {
                            let x = cu.get(&[a, i[0], i[1], i[2]]);
                            if x.is_zero() {
                                continue;
                            }
                            let y = cd.get(&[b, i[0], i[1], i[2]]);
                            if !y.is_zero() {
                                acc = acc.add(&x.mul(y));
                            }
                        }
                        acc
                    })
                    .collect()
            })
            .collect();
        let (det, adjugate) = S::det_adjugate(ctx, &matrix);
        LOperator { matrix, det, adjugate }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Policy {
    #[serde(rename = "from-L")]
    FromL,
    #[serde(rename = "from-C")]
    FromC,
    #[serde(rename = "dim4-C3")]
    Dim4C3,
    #[serde(rename = "user-supplied")]
    User,
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Policy::FromL => "from-L",
            Policy::FromC => "from-C",
            Policy::Dim4C3 => "dim4-C3",
            Policy::User => "user-supplied",
        })
    }
}

impl std::str::FromStr for Policy {
    type Err = String;
    fn from_str(s: &str) -> Result<Policy, String> {
        match s {
            "from-L" => Ok(Policy::FromL),
            "from-C" => Ok(Policy::FromC),
            "dim4-C3" => Ok(Policy::Dim4C3),
            _ => Err(format!("unknown policy `{s}`")),
        }
    }
}

/// A tensor `D̃^acde` with `D̃^acde C_bcde = −δ^a_b`.
#[derive(Clone, Debug)]
pub struct DualCandidate<S: Scalar> {
    /// `D̃^acde`, all indices up.
    pub up: Tensor<S>,
    pub policy: Policy,
}

impl<S: Scalar> DualCandidate<S> {
    /// `D̃^ac_d^e`, the placement in which it is conformally invariant.
    pub fn canonical(&self, pack: &CurvaturePack<S>) -> Tensor<S> {
        pack.lc.lower(&self.up, 2).expect("upper slot")
    }

    /// `D̃^acde C_bcde`.
    pub fn contraction(&self, pack: &CurvaturePack<S>) -> Vec<Vec<S>> {
        let n = pack.dim();
        let ctx = pack.ctx();
        let idx: Vec<Vec<usize>> = multi_indices(n, 3).collect();
        (0..n)
            .map(|a| {
                (0..n)
                    .map(|b| {
                        let mut acc = S::constant(ctx, 0.0);
                        for i in &idx {
                            let x = self.up.get(&[a, i[0], i[1], i[2]]);
                            if !x.is_zero() {
                                acc = acc.add(&x.mul(pack.weyl.get(&[b, i[0], i[1], i[2]])));
                            }
                        }
                        acc
                    })
                    .collect()
            })
            .collect()
    }

    /// `K_a = D̃_a^cde A_cde`.
    pub fn k_field(&self, pack: &CurvaturePack<S>) -> Tensor<S> {
        let n = pack.dim();
        let ctx = pack.ctx();
        let idx: Vec<Vec<usize>> = multi_indices(n, 3).collect();
        let kup = Tensor::from_fn(n, vec![Slot::Up], 0, |a| {
            let mut acc = S::constant(ctx, 0.0);
            for i in &idx {
                let x = self.up.get(&[a[0], i[0], i[1], i[2]]);
                if !x.is_zero() {
                    acc = acc.add(&x.mul(pack.cotton.get(i)));
                }
            }
            acc
        });
        pack.lc.lower(&kup, 0).expect("upper").with_weight(0)
    }
}

impl DualCandidate<f64> {
    /// Max deviation of `D̃^acde C_bcde` from `−δ^a_b`.
    pub fn defect(&self, pack: &CurvaturePack<f64>) -> f64 {
        let m = self.contraction(pack);
        let mut worst: f64 = 0.0;
        for (a, row) in m.iter().enumerate() {
            for (b, v) in row.iter().enumerate() {
                worst = worst.max((v + if a == b { 1.0 } else { 0.0 }).abs());
            }
        }
        worst
    }
}

impl DualCandidate<Jet> {
    pub fn defect(&self, pack: &CurvaturePack<Jet>) -> f64 {
        let m = self.contraction(pack);
        let mut worst: f64 = 0.0;
        for (a, row) in m.iter().enumerate() {
            for (b, v) in row.iter().enumerate() {
                worst = worst.max((v.value() + if a == b { 1.0 } else { 0.0 }).abs());
            }
        }
        worst
    }
}

/// `C³ = C_ab^cd C_cd^ef C_ef^ab`.
pub fn c_cubed<S: Scalar>(ctx: &S::Ctx, cdu: &Tensor<S>) -> S {
    let n = cdu.dim;
    let pairs: Vec<(usize, usize)> = multi_indices(n, 2).map(|i| (i[0], i[1])).collect();
    let m: Vec<Vec<S>> = pairs.iter().map(|&(a, b)| pairs.iter().map(|&(c, d)| cdu.get(&[a, b, c, d]).clone()).collect()).collect();
    let m2 = crate::scalar::matmul(ctx, &m, &m);
    let mut acc = S::constant(ctx, 0.0);
    for i in 0..pairs.len() {
        for k in 0..pairs.len() {
            if !m2[i][k].is_zero() && !m[k][i].is_zero() {
                acc = acc.add(&m2[i][k].mul(&m[k][i]));
            }
        }
    }
    acc
}

/// Builds `D̃` by the requested policy. `point` only labels errors.
pub fn dual_candidate<S: Adjugate>(
    pack: &CurvaturePack<S>,
    policy: Policy,
    tol: &Tolerances,
    point: &str,
) -> Result<DualCandidate<S>, GenericityError> {
    let n = pack.dim();
    let ctx = pack.ctx();
    let nf = n as f64;
    let fail = |what, value| GenericityError::Precondition { policy, what, point: point.to_string(), value };
    if let Some(size) = negligible_weyl(pack, tol) {
        return Err(fail("nonzero Weyl curvature", size));
    }
    let up = match policy {
        Policy::FromL => {
            let l = LOperator::new(pack);
            let lv = value_matrix(&l.matrix);
            let k = kernel(&lv, tol.rank_tol);
            let det = l.det.approx().unwrap_or(f64::NAN);
            if k.rank < n || det == 0.0 {
                return Err(fail("‖L‖ ≠ 0", det));
            }
            let cu = weyl_up(pack);
            let inv = l.det.recip().neg();
            Tensor::from_fn(n, vec![Slot::Up; 4], -2, |i| {
                let mut acc = S::constant(ctx, 0.0);
                for b in 0..n {
                    let x = &l.adjugate[i[0]][b];
                    if !x.is_zero() {
                        acc = acc.add(&x.mul(cu.get(&[b, i[1], i[2], i[3]])));
                    }
                }
                acc.mul(&inv)
            })
        }
        Policy::FromC => {
            let w = WeylOperator::new(pack);
            let k = kernel(&value_matrix(&w.matrix), tol.rank_tol);
            let det = w.det.approx().unwrap_or(f64::NAN);
            if k.dim() > 0 || det == 0.0 {
                return Err(fail("‖C‖ ≠ 0", det));
            }
            let f = w.det.recip().scale(ctx, 2.0 / (1.0 - nf));
            let t = pack.lc.with_slots(&w.tilde, &[Slot::Up; 4]).expect("rank 4");
            t.times(&f).with_weight(-2)
        }
        Policy::Dim4C3 => {
            if n != 4 {
                return Err(GenericityError::Dimension(n));
            }
            let cdu = weyl_down_up(pack);
            let c3 = c_cubed(ctx, &cdu);
            let c3v = c3.approx().unwrap_or(f64::NAN);
            let norm = cdu.data.iter().filter_map(|v| v.approx()).fold(0.0f64, |m, v| m.max(v.abs()));
            if !(c3v.abs() > tol.rank_tol * norm.powi(3)) {
                return Err(fail("C³ ≠ 0", c3v));
            }
            // D̃^acde = −4 C^de_fg C^fgac / C³
            let cu = weyl_up(pack);
            let f = c3.recip().scale(ctx, -4.0);
            Tensor::from_fn(n, vec![Slot::Up; 4], -2, |i| {
                let (a, c, d, e) = (i[0], i[1], i[2], i[3]);
                let mut acc = S::constant(ctx, 0.0);
                for fi in 0..n {
                    for g in 0..n {
                        let x = cdu.get(&[fi, g, d, e]);
                        if !x.is_zero() {
                            acc = acc.add(&x.mul(cu.get(&[fi, g, a, c])));
                        }
                    }
                }
                acc.mul(&f)
            })
        }
        Policy::User => return Err(GenericityError::Dimension(n)),
    };
    Ok(DualCandidate { up, policy })
}

/// First policy of from-L, from-C, dim4-C3 whose precondition holds.
pub fn auto_dual<S: Adjugate>(pack: &CurvaturePack<S>, tol: &Tolerances, point: &str) -> Result<DualCandidate<S>, GenericityError> {
    let mut last = None;
    for p in [Policy::FromL, Policy::FromC, Policy::Dim4C3] {
        match dual_candidate(pack, p, tol, point) {
            Ok(d) => return Ok(d),
            Err(e) => last = Some(e),
        }
    }
    Err(last.expect("at least one policy tried"))
}

/// `Some(max|C|)` when the Weyl tensor is numerically zero at the point.
fn negligible_weyl<S: Scalar>(pack: &CurvaturePack<S>, tol: &Tolerances) -> Option<f64> {
    let size = |t: &Tensor<S>| t.data.iter().map(|v| v.approx().map(f64::abs)).try_fold(0.0f64, |m, v| v.map(|v| m.max(v)));
    let c = size(&pack.weyl)?;
    let scale = [c, size(&pack.cotton)?, size(&pack.schouten)?].into_iter().fold(1.0, f64::max);
    (c <= tol.bound(scale)).then_some(c)
}

fn value_matrix<S: Scalar>(m: &[Vec<S>]) -> DMatrix<f64> {
    DMatrix::from_fn(m.len(), m[0].len(), |i, j| m[i][j].approx().unwrap_or(f64::NAN))
}

/// Genericity data at one point.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PointGenericity {
    pub point: Vec<f64>,
    pub weakly_generic: bool,
    /// Basis of `{V : C_abcd V^d = 0}`.
    pub weak_kernel: Vec<Vec<f64>>,
    pub lambda2_generic: bool,
    /// `‖C‖`.
    pub weyl_det: f64,
    /// `‖L‖`.
    pub l_det: f64,
    pub generic: bool,
    pub skew_kernel_dim: usize,
    pub symmetric_kernel_dim: usize,
    pub dual_kernel_dim: usize,
    /// Solutions common to the symmetric and the ε-dual system.
    pub joint_kernel_dim: usize,
    /// `C³` and `*C³`, dimension 4 only.
    pub c3: Option<f64>,
    pub star_c3: Option<f64>,
    /// `4 C^abce C_abcd − |C|² δ^e_d` in dimension 4.
    pub four_identity: Option<f64>,
}

impl PointGenericity {
    /// generic ⇒ Λ²-generic ⇒ weakly generic.
    pub fn consistent(&self) -> bool {
        (!self.generic || self.lambda2_generic) && (!self.lambda2_generic || self.weakly_generic)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Agreement {
    All,
    None,
    Mixed,
}

impl Agreement {
    pub fn of(flags: impl IntoIterator<Item = bool>) -> Agreement {
        let (mut t, mut f) = (0, 0);
        for x in flags {
            if x {
                t += 1
            } else {
                f += 1
            }
        }
        match (t, f) {
            (_, 0) => Agreement::All,
            (0, _) => Agreement::None,
            _ => Agreement::Mixed,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct GenericityReport {
    pub points: Vec<PointGenericity>,
    pub weakly_generic: Agreement,
    pub lambda2_generic: Agreement,
    pub generic: Agreement,
}

impl GenericityReport {
    pub fn from_points(points: Vec<PointGenericity>) -> GenericityReport {
        GenericityReport {
            weakly_generic: Agreement::of(points.iter().map(|p| p.weakly_generic)),
            lambda2_generic: Agreement::of(points.iter().map(|p| p.lambda2_generic)),
            generic: Agreement::of(points.iter().map(|p| p.generic)),
            points,
        }
    }
}

/// Kernels of `C_abcd V^d = 0`, `C_abcd F^ab = 0`, `C_abcd H^bd = 0` and
/// `C*_{b1…b_{n−2}cd} H^{b1 d} = 0` at one point. Generic means no nonzero
/// `F`, and no nonzero trace-free `H` solving the last two together.
pub fn classify_point(pack: &CurvaturePack<f64>, point: &[f64], tol: &Tolerances) -> PointGenericity {
    let n = pack.dim();
    let g = &pack.lc.g;
    // Weyl at round-off level counts as zero: every system is then degenerate
    let flat = pack.weyl.max_abs() <= tol.bound(pack.scale());
    let zero = pack.weyl.map(|_| 0.0);
    let c = if flat { &zero } else { &pack.weyl };

    let rows: Vec<Vec<usize>> = multi_indices(n, 3).collect();
    let weak = DMatrix::from_fn(rows.len(), n, |r, d| *c.get(&[rows[r][0], rows[r][1], rows[r][2], d]));
    let kw = kernel(&weak, tol.rank_tol);

    let pairs = lambda2_pairs(n);
    let cd: Vec<(usize, usize)> = pairs.clone();
    let skew = DMatrix::from_fn(cd.len(), pairs.len(), |r, k| 2.0 * *c.get(&[pairs[k].0, pairs[k].1, cd[r].0, cd[r].1]));
    let ks = kernel(&skew, tol.rank_tol);

    // symmetric H^bd parametrized by b ≤ d; the trace row pins trace-freeness
    let sym: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let cmax = c.max_abs().max(f64::MIN_POSITIVE);
    let sym_coeff = |f: &dyn Fn(usize, usize) -> f64, k: usize| {
        let (b, d) = sym[k];
        if b == d {
            f(b, d)
        } else {
            f(b, d) + f(d, b)
        }
    };
    let ac: Vec<(usize, usize)> = multi_indices(n, 2).map(|i| (i[0], i[1])).collect();
    let mut symm = DMatrix::zeros(ac.len() + 1, sym.len());
    for (r, &(a, cc)) in ac.iter().enumerate() {
        for k in 0..sym.len() {
            symm[(r, k)] = sym_coeff(&|b, d| *c.get(&[a, b, cc, d]), k);
        }
    }
    for k in 0..sym.len() {
        symm[(ac.len(), k)] = cmax * sym_coeff(&|b, d| *g.get(&[b, d]), k);
    }
    let kb = kernel(&symm, tol.rank_tol);

    // C*_{b1 b⃗ c d} = ε_{b1 b⃗ ef} C^ef_cd = 2 vol sign(b1 b⃗ p q) C^pq_cd
    let cuu = pack.lc.raise(&pack.lc.raise(c, 0).unwrap(), 1).unwrap();
    let det_g = crate::scalar::to_dmatrix(&(0..n).map(|i| (0..n).map(|j| *g.get(&[i, j])).collect()).collect::<Vec<_>>()).determinant();
    let vol = det_g.abs().sqrt();
    let rest: Vec<Vec<usize>> = increasing(n, n - 3);
    let mut drows: Vec<Vec<f64>> = Vec::new();
    for bs in &rest {
        for cc in 0..n {
            let mut row = vec![0.0; sym.len()];
            for (k, &(x, y)) in sym.iter().enumerate() {
                let coeff = |b1: usize, d: usize| -> f64 {
                    if bs.contains(&b1) {
                        return 0.0;
                    }
                    let mut used: Vec<usize> = vec![b1];
                    used.extend(bs);
                    let free: Vec<usize> = (0..n).filter(|v| !used.contains(v)).collect();
                    let (p, q) = (free[0], free[1]);
                    let mut perm = used.clone();
                    perm.push(p);
                    perm.push(q);
                    2.0 * vol * permutation_sign(&perm) as f64 * cuu.get(&[p, q, cc, d])
                };
                row[k] = if x == y { coeff(x, y) } else { coeff(x, y) + coeff(y, x) };
            }
            drows.push(row);
        }
    }
    let dscale = drows.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let mut dual = DMatrix::zeros(drows.len() + 1, sym.len());
    for (r, row) in drows.iter().enumerate() {
        for (k, v) in row.iter().enumerate() {
            dual[(r, k)] = *v;
        }
    }
    for k in 0..sym.len() {
        dual[(drows.len(), k)] = dscale * sym_coeff(&|b, d| *g.get(&[b, d]), k);
    }
    let kd = kernel(&dual, tol.rank_tol);
    // H must solve both symmetric systems at once
    let joint = stack_normalized(&symm, &dual);
    let kj = kernel(&joint, tol.rank_tol);

    let wop = WeylOperator::new(pack);
    let lop = LOperator::new(pack);
    let (c3, star_c3, four_identity) = if n == 4 { dim4_scalars(pack) } else { (None, None, None) };
    PointGenericity {
        point: point.to_vec(),
        weakly_generic: kw.dim() == 0,
        weak_kernel: kw.basis.iter().map(|v| v.iter().copied().collect()).collect(),
        lambda2_generic: ks.dim() == 0,
        weyl_det: wop.det,
        l_det: lop.det,
        generic: ks.dim() == 0 && kj.dim() == 0,
        skew_kernel_dim: ks.dim(),
        symmetric_kernel_dim: kb.dim(),
        dual_kernel_dim: kd.dim(),
        joint_kernel_dim: kj.dim(),
        c3,
        star_c3,
        four_identity,
    }
}

fn stack_normalized(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let sa = a.amax().max(f64::MIN_POSITIVE);
    let sb = b.amax().max(f64::MIN_POSITIVE);
    let mut m = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols());
    m.rows_mut(0, a.nrows()).copy_from(&(a / sa));
    m.rows_mut(a.nrows(), b.nrows()).copy_from(&(b / sb));
    m
}

fn increasing(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for v in start..n {
            cur.push(v);
            rec(v + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// `C³`, `*C³` and the residual of `4 C^abce C_abcd = |C|² δ^e_d`.
fn dim4_scalars(pack: &CurvaturePack<f64>) -> (Option<f64>, Option<f64>, Option<f64>) {
    let n = 4;
    let cdu = weyl_down_up(pack);
    let c3 = c_cubed(&(), &cdu);
    let eps = pack.lc.epsilon(1).ok();
    let star = eps.map(|e| {
        // *C_abcd = ε_abef C^ef_cd
        let cuu = pack.lc.raise(&pack.lc.raise(&pack.weyl, 0).unwrap(), 1).unwrap();
        let s = Tensor::from_fn(n, vec![Slot::Down; 4], 2, |i| {
            let mut acc = 0.0;
            for x in 0..n {
                for y in 0..n {
                    acc += e.get(&[i[0], i[1], x, y]) * cuu.get(&[x, y, i[2], i[3]]);
                }
            }
            acc
        });
        let sdu = pack.lc.raise(&pack.lc.raise(&s, 2).unwrap(), 3).unwrap();
        c_cubed(&(), &sdu)
    });
    let cu = weyl_up(pack);
    let c2: f64 = cu.data.iter().zip(&pack.weyl.data).map(|(a, b)| a * b).sum();
    let mut worst: f64 = 0.0;
    for e in 0..n {
        for d in 0..n {
            let mut acc = 0.0;
            for i in multi_indices(n, 3) {
                acc += cu.get(&[i[0], i[1], i[2], e]) * pack.weyl.get(&[i[0], i[1], i[2], d]);
            }
            worst = worst.max((4.0 * acc - if e == d { c2 } else { 0.0 }).abs());
        }
    }
    (Some(c3), star, Some(worst))
}

/// Values-only copy of a jet pack.
pub fn pack_values(pack: &CurvaturePack<Jet>) -> CurvaturePack<f64> {
    let lc = &pack.lc;
    CurvaturePack {
        lc: crate::geometry::LeviCivita { ctx: (), dim: lc.dim, g: lc.g.values(), ginv: lc.ginv.values(), gamma: lc.gamma.values() },
        riemann: pack.riemann.values(),
        ricci: pack.ricci.values(),
        scalar: pack.scalar.value(),
        schouten: pack.schouten.values(),
        j: pack.j.value(),
        weyl: pack.weyl.values(),
        cotton: pack.cotton.values(),
        bach: pack.bach.values(),
    }
}
