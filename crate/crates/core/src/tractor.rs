//! Standard tractor calculus in a fixed scale.
//!
//! A standard tractor `V^A = Y^A α + Z^{Aa} μ_a + X^A τ` is stored by its
//! coefficients `(α, μ_1..μ_n, τ)`, so slot 0 is the `Y` direction, slots
//! `1..=n` the `Z_a` directions and slot `n+1` the `X` direction. Every
//! tractor index of a [`TractorTensor`] is stored this way; lowering goes
//! through the pairing matrix of [`tractor_metric`]. Densities are
//! trivialised by the current scale, so a change of scale multiplies a
//! weight-`w` quantity by `e^{wΥ}`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::curvature::{CurvaturePack, Tolerances};
use crate::expr::Expr;
use crate::genericity::{classify_point, pack_values};
use crate::geometry::{multi_indices, FieldProgram, GeometryError, MetricField, Slot, Tensor};
use crate::jet::Jet;
use crate::obstructions::{cspace_residual, Theorem, Verdict};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TractorError {
    #[error("σ vanishes at {0}: conformal singularity")]
    SigmaVanishes(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Tensor field with extra standard-tractor slots, components in the
/// `(Y, Z_a, X)` splitting of the current scale. Tensor indices come first.
#[derive(Clone, Debug)]
pub struct TractorTensor<S> {
    pub dim: usize,
    pub tensor_slots: Vec<Slot>,
    pub tractor_slots: usize,
    /// Density weight on top of the tractor slots.
    pub weight: i32,
    pub data: Vec<S>,
}

impl<S: Clone> TractorTensor<S> {
    pub fn shape(&self) -> Vec<usize> {
        let mut s = vec![self.dim; self.tensor_slots.len()];
        s.extend(std::iter::repeat_n(self.dim + 2, self.tractor_slots));
        s
    }

    pub fn from_fn(dim: usize, tensor_slots: Vec<Slot>, tractor_slots: usize, weight: i32, mut f: impl FnMut(&[usize]) -> S) -> Self {
        let mut t = TractorTensor { dim, tensor_slots, tractor_slots, weight, data: Vec::new() };
        t.data = indices(&t.shape()).map(|i| f(&i)).collect();
        t
    }

    pub fn offset(&self, idx: &[usize]) -> usize {
        idx.iter().zip(self.shape()).fold(0, |acc, (i, n)| acc * n + i)
    }

    pub fn get(&self, idx: &[usize]) -> &S {
        &self.data[self.offset(idx)]
    }

    pub fn map<T: Clone>(&self, f: impl Fn(&S) -> T) -> TractorTensor<T> {
        TractorTensor { dim: self.dim, tensor_slots: self.tensor_slots.clone(), tractor_slots: self.tractor_slots, weight: self.weight, data: self.data.iter().map(f).collect() }
    }
}

impl TractorTensor<f64> {
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sub(&self, o: &Self) -> Self {
        let mut t = self.clone();
        t.data.iter_mut().zip(&o.data).for_each(|(a, b)| *a -= b);
        t
    }
}

impl TractorTensor<Jet> {
    pub fn values(&self) -> TractorTensor<f64> {
        self.map(Jet::value)
    }
}

/// All multi-indices for a mixed shape, row-major.
pub fn indices(shape: &[usize]) -> impl Iterator<Item = Vec<usize>> + '_ {
    let total: usize = shape.iter().product();
    (0..total).map(move |mut flat| {
        let mut idx = vec![0; shape.len()];
        for k in (0..shape.len()).rev() {
            idx[k] = flat % shape[k];
            flat /= shape[k];
        }
        idx
    })
}

/// Pairing `h(V, W) = Vᵀ H W` on coefficient vectors:
/// `h = α τ' + τ α' + g^ab μ_a μ'_b`.
pub fn tractor_metric<S: Scalar>(pack: &CurvaturePack<S>) -> Vec<Vec<S>> {
    let n = pack.dim();
    let ctx = pack.ctx();
    let mut h = vec![vec![S::constant(ctx, 0.0); n + 2]; n + 2];
    h[0][n + 1] = S::constant(ctx, 1.0);
    h[n + 1][0] = S::constant(ctx, 1.0);
    for a in 0..n {
        for b in 0..n {
            h[1 + a][1 + b] = pack.lc.ginv.get(&[a, b]).clone();
        }
    }
    h
}

/// `h^AB` as a two-slot tractor: `Y^A X^B + X^A Y^B + g_ab Z^{Aa} Z^{Bb}`.
pub fn tractor_metric_inverse<S: Scalar>(pack: &CurvaturePack<S>) -> TractorTensor<S> {
    let n = pack.dim();
    let ctx = pack.ctx();
    TractorTensor::from_fn(n, vec![], 2, 0, |i| {
        let (p, q) = (i[0], i[1]);
        if (p == 0 && q == n + 1) || (p == n + 1 && q == 0) {
            S::constant(ctx, 1.0)
        } else if (1..=n).contains(&p) && (1..=n).contains(&q) {
            pack.lc.g.get(&[p - 1, q - 1]).clone()
        } else {
            S::constant(ctx, 0.0)
        }
    })
}

/// `h(V, W)`.
pub fn pair<S: Scalar>(ctx: &S::Ctx, h: &[Vec<S>], v: &[S], w: &[S]) -> S {
    let mut acc = S::constant(ctx, 0.0);
    for (i, hi) in h.iter().enumerate() {
        for (j, hij) in hi.iter().enumerate() {
            if !hij.is_zero() && !v[i].is_zero() && !w[j].is_zero() {
                acc = acc.add(&v[i].mul(hij).mul(&w[j]));
            }
        }
    }
    acc
}

/// `M_a` with `(∇_a V)^P = ∂_a V^P + M_a^P_Q V^Q`, Levi-Civita term on `μ`
/// included.
fn connection_matrices<S: Scalar>(pack: &CurvaturePack<S>) -> Vec<Vec<Vec<S>>> {
    let n = pack.dim();
    let ctx = pack.ctx();
    let z = S::constant(ctx, 0.0);
    (0..n)
        .map(|a| {
            let mut m = vec![vec![z.clone(); n + 2]; n + 2];
            m[0][1 + a] = S::constant(ctx, -1.0);
            for b in 0..n {
                for c in 0..n {
                    m[1 + b][1 + c] = pack.lc.gamma.get(&[c, a, b]).neg();
                }
                m[1 + b][n + 1] = pack.lc.g.get(&[a, b]).clone();
                m[1 + b][0] = pack.schouten.get(&[a, b]).clone();
            }
            for c in 0..n {
                let mut acc = z.clone();
                for d in 0..n {
                    acc = acc.add(&pack.schouten.get(&[a, d]).mul(pack.lc.ginv.get(&[d, c])));
                }
                m[n + 1][1 + c] = acc.neg();
            }
            m
        })
        .collect()
}

/// Coupled Levi-Civita tractor connection; the new derivative slot is
/// first. Densities are trivialised by the scale, so they differentiate
/// as functions.
pub fn tractor_connection<S: Scalar>(pack: &CurvaturePack<S>, t: &TractorTensor<S>) -> TractorTensor<S> {
    let n = t.dim;
    let ctx = pack.ctx();
    let m = connection_matrices(pack);
    let rank = t.tensor_slots.len();
    let mut slots = vec![Slot::Down];
    slots.extend(&t.tensor_slots);
    TractorTensor::from_fn(n, slots, t.tractor_slots, t.weight, |i| {
        let a = i[0];
        let rest = &i[1..];
        let mut acc = t.get(rest).partial(ctx, a);
        let mut idx = rest.to_vec();
        for k in 0..rank {
            let orig = idx[k];
            for e in 0..n {
                let (g, sign) = match t.tensor_slots[k] {
                    Slot::Up => (pack.lc.gamma.get(&[orig, a, e]), false),
                    Slot::Down => (pack.lc.gamma.get(&[e, a, orig]), true),
                };
                if g.is_zero() {
                    continue;
                }
                idx[k] = e;
                let term = g.mul(t.get(&idx));
                acc = if sign { acc.sub(&term) } else { acc.add(&term) };
            }
            idx[k] = orig;
        }
        for s in 0..t.tractor_slots {
            let k = rank + s;
            let orig = idx[k];
            for q in 0..n + 2 {
                let c = &m[a][orig][q];
                if c.is_zero() {
                    continue;
                }
                idx[k] = q;
                acc = acc.add(&c.mul(t.get(&idx)));
            }
            idx[k] = orig;
        }
        acc
    })
}

/// Per-slot change of splitting for `ĝ = e^{2Υ} g`, in function form:
/// `α̂ = e^Υ α`, `μ̂ = e^Υ(μ + αΥ)`, `τ̂ = e^{−Υ}(τ − Υ^b μ_b − ½|Υ|² α)`.
fn scale_matrix<S: Scalar>(ctx: &S::Ctx, ginv: &Tensor<S>, ups: &S, d: &[S]) -> Vec<Vec<S>> {
    let n = d.len();
    let z = S::constant(ctx, 0.0);
    let (ep, em) = (ups.exp(), ups.neg().exp());
    let up: Vec<S> = (0..n).map(|b| (0..n).fold(z.clone(), |acc, c| acc.add(&ginv.get(&[b, c]).mul(&d[c])))).collect();
    let sq = (0..n).fold(z.clone(), |acc, b| acc.add(&up[b].mul(&d[b])));
    let mut m = vec![vec![z.clone(); n + 2]; n + 2];
    m[0][0] = ep.clone();
    for a in 0..n {
        m[1 + a][0] = ep.mul(&d[a]);
        m[1 + a][1 + a] = ep.clone();
        m[n + 1][1 + a] = em.mul(&up[a]).neg();
    }
    m[n + 1][0] = em.mul(&sq).scale(ctx, -0.5);
    m[n + 1][n + 1] = em;
    m
}

/// Rewrites `t` in the splitting of `e^{2Υ} g`. `ginv` is the inverse of
/// the source metric and `d` the differential of `Υ`.
pub fn change_scale<S: Scalar>(ctx: &S::Ctx, t: &TractorTensor<S>, ginv: &Tensor<S>, ups: &S, d: &[S]) -> TractorTensor<S> {
    let n = t.dim;
    let m = scale_matrix(ctx, ginv, ups, d);
    let rank = t.tensor_slots.len();
    let mut cur = t.clone();
    for s in 0..t.tractor_slots {
        let k = rank + s;
        let src = cur.clone();
        cur = TractorTensor::from_fn(n, src.tensor_slots.clone(), src.tractor_slots, src.weight, |i| {
            let mut idx = i.to_vec();
            let mut acc = S::constant(ctx, 0.0);
            for q in 0..n + 2 {
                let c = &m[i[k]][q];
                if !c.is_zero() {
                    idx[k] = q;
                    acc = acc.add(&c.mul(src.get(&idx)));
                }
            }
            acc
        });
    }
    if t.weight != 0 {
        let f = ups.scale(ctx, t.weight as f64).exp();
        cur.data = cur.data.iter().map(|v| v.mul(&f)).collect();
    }
    cur
}

/// `Ω_ab^{CE} = Z^{Cc}Z^{Ee}C_abce − X^C Z^{Ee}A_eab + X^E Z^{Cc}A_cab`.
pub fn omega<S: Scalar>(pack: &CurvaturePack<S>) -> TractorTensor<S> {
    let n = pack.dim();
    let ctx = pack.ctx();
    let x = n + 1;
    TractorTensor::from_fn(n, vec![Slot::Down, Slot::Down], 2, 0, |i| {
        let (a, b, p, q) = (i[0], i[1], i[2], i[3]);
        let inner = |k: usize| (1..=n).contains(&k).then(|| k - 1);
        match (inner(p), inner(q)) {
            (Some(c), Some(e)) => pack.weyl.get(&[a, b, c, e]).clone(),
            (None, Some(e)) if p == x => pack.cotton.get(&[e, a, b]).neg(),
            (Some(c), None) if q == x => pack.cotton.get(&[c, a, b]).clone(),
            _ => S::constant(ctx, 0.0),
        }
    })
}

/// `g^pa ∇_p Ω_ab^{CE}` through the coupled connection.
pub fn div_omega<S: Scalar>(pack: &CurvaturePack<S>) -> TractorTensor<S> {
    let n = pack.dim();
    let ctx = pack.ctx();
    let nab = tractor_connection(pack, &omega(pack));
    TractorTensor::from_fn(n, vec![Slot::Down], 2, -2, |i| {
        let mut acc = S::constant(ctx, 0.0);
        for p in 0..n {
            for a in 0..n {
                let g = pack.lc.ginv.get(&[p, a]);
                if !g.is_zero() {
                    acc = acc.add(&g.mul(nab.get(&[p, a, i[0], i[1], i[2]])));
                }
            }
        }
        acc
    })
}

/// Closed form `(n−4)Z^{Dd}Z^{Ee}A_cde − X^D Z^{Ee}B_ec + X^E Z^{Dd}B_dc`.
pub fn div_omega_closed<S: Scalar>(pack: &CurvaturePack<S>) -> TractorTensor<S> {
    let n = pack.dim();
    let ctx = pack.ctx();
    let x = n + 1;
    let k = n as f64 - 4.0;
    TractorTensor::from_fn(n, vec![Slot::Down], 2, -2, |i| {
        let (c, p, q) = (i[0], i[1], i[2]);
        let inner = |k: usize| (1..=n).contains(&k).then(|| k - 1);
        match (inner(p), inner(q)) {
            (Some(d), Some(e)) => pack.cotton.get(&[c, d, e]).scale(ctx, k),
            (None, Some(e)) if p == x => pack.bach.get(&[e, c]).neg(),
            (Some(d), None) if q == x => pack.bach.get(&[d, c]).clone(),
            _ => S::constant(ctx, 0.0),
        }
    })
}

/// `W^{ABCE} = (n−4)Z^{Aa}Z^{Bb}Ω_ab^{CE} − 2X^{[A}Z^{B]b}∇^pΩ_pb^{CE}`,
/// from an already computed divergence.
pub fn w_tensor<S: Scalar>(pack: &CurvaturePack<S>, om: &TractorTensor<S>, div: &TractorTensor<S>) -> TractorTensor<S> {
    let n = pack.dim();
    let ctx = pack.ctx();
    let x = n + 1;
    let k = n as f64 - 4.0;
    TractorTensor::from_fn(n, vec![], 4, 0, |i| {
        let (p, q, c, e) = (i[0], i[1], i[2], i[3]);
        let inner = |k: usize| (1..=n).contains(&k).then(|| k - 1);
        match (inner(p), inner(q)) {
            (Some(a), Some(b)) => om.get(&[a, b, c, e]).scale(ctx, k),
            (None, Some(b)) if p == x => div.get(&[b, c, e]).neg(),
            (Some(b), None) if q == x => div.get(&[b, c, e]).clone(),
            _ => S::constant(ctx, 0.0),
        }
    })
}

/// Contracts the last tractor slot of `t` with `v` through `h`.
pub fn contract_last<S: Scalar>(ctx: &S::Ctx, h: &[Vec<S>], t: &TractorTensor<S>, v: &[S]) -> TractorTensor<S> {
    let m = v.len();
    let lowered: Vec<S> = (0..m).map(|f| (0..m).fold(S::constant(ctx, 0.0), |acc, e| if h[f][e].is_zero() { acc } else { acc.add(&h[f][e].mul(&v[e])) })).collect();
    let mut shape = t.shape();
    shape.pop();
    TractorTensor::from_fn(t.dim, t.tensor_slots.clone(), t.tractor_slots - 1, t.weight, |i| {
        let mut idx = i.to_vec();
        idx.push(0);
        let mut acc = S::constant(ctx, 0.0);
        for f in 0..m {
            if !lowered[f].is_zero() {
                *idx.last_mut().unwrap() = f;
                acc = acc.add(&t.get(&idx).mul(&lowered[f]));
            }
        }
        acc
    })
}

/// `D_A f = (n+2w−2)w Y_A f + (n+2w−2) Z_Aa ∇^a f − X_A(Δ + wJ) f` for `f`
/// of weight `w`, returned with the index raised. `f` needs two more orders
/// than the result.
pub fn tractor_d(pack: &CurvaturePack<Jet>, f: &Jet, w: i32) -> TractorTensor<Jet> {
    let n = pack.dim();
    let ctx = pack.ctx();
    let wf = w as f64;
    let k = n as f64 + 2.0 * wf - 2.0;
    let df: Vec<Jet> = (0..n).map(|a| f.partial(a)).collect();
    let mut lap = Jet::constant(ctx, 0.0);
    for a in 0..n {
        for b in 0..n {
            let gi = pack.lc.ginv.get(&[a, b]);
            let mut hess = df[b].partial(a);
            for c in 0..n {
                hess = hess.sub(&pack.lc.gamma.get(&[c, a, b]).mul(&df[c]));
            }
            lap = lap.add(&gi.mul(&hess));
        }
    }
    let tau = lap.add(&pack.j.mul(f).scale(wf)).scale(-1.0);
    TractorTensor::from_fn(n, vec![], 1, w - 1, |i| match i[0] {
        0 => f.scale(k * wf),
        p if p == n + 1 => tau.clone(),
        p => df[p - 1].scale(k),
    })
}

/// `I = (1/n) D σ` for a weight-1 scale `σ`.
pub fn einstein_tractor(pack: &CurvaturePack<Jet>, sigma: &Jet) -> TractorTensor<Jet> {
    let n = pack.dim() as f64;
    tractor_d(pack, sigma, 1).map(|v| v.scale(1.0 / n))
}

/// Jets of a scalar expression on the metric's chart.
pub fn scalar_jet(metric: &MetricField, f: &Expr, point: &[f64], order: usize) -> Result<Jet, TractorError> {
    let prog = FieldProgram::new(&metric.chart, &metric.params, std::slice::from_ref(f))?;
    Ok(prog.jets(point, order)?.remove(0))
}

#[derive(Clone, Debug, Serialize)]
pub struct ParallelPoint {
    pub point: Vec<f64>,
    pub sigma: f64,
    /// `max|∇I|`.
    pub residual: f64,
    /// `|I|∞ · scale`.
    pub norm: f64,
    /// `h(I, I)`.
    pub h_ii: f64,
    /// `−(2/n) σ² J`, equal to `h(I, I)` in an Einstein scale.
    pub h_ii_einstein: f64,
    /// Trace-free Schouten tensor of `σ^{−2} g`, relative to its scale.
    pub rescaled_tf_schouten: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ParallelReport {
    pub points: Vec<ParallelPoint>,
    pub einstein_scale: bool,
}

/// Whether `σ` is an Einstein scale: `I = (1/n)Dσ` parallel, with the
/// trace-free Schouten tensor of `σ^{−2}g` reported alongside.
pub fn parallel_tractor_check(metric: &MetricField, sigma: &Expr, points: &[Vec<f64>], tol: &Tolerances) -> Result<ParallelReport, TractorError> {
    let rescaled = metric.conformal_rescale(&sigma.ln().neg());
    let pts: Result<Vec<ParallelPoint>, TractorError> = points
        .par_iter()
        .map(|p| {
            let pack = CurvaturePack::<Jet>::at_point(metric, p)?;
            let s = scalar_jet(metric, sigma, p, 3)?;
            if s.value().abs() <= tol.tol_abs {
                return Err(TractorError::SigmaVanishes(metric.chart.format_point(p)));
            }
            let i = einstein_tractor(&pack, &s);
            let iv: Vec<f64> = i.data.iter().map(Jet::value).collect();
            let residual = tractor_connection(&pack, &i).values().max_abs();
            let vals = pack_values(&pack);
            let norm = iv.iter().fold(0.0f64, |m, v| m.max(v.abs())) * vals.scale();
            let h = tractor_metric(&vals);
            let n = pack.dim() as f64;
            let hat = pack_values(&CurvaturePack::<Jet>::at_point(&rescaled, p)?);
            Ok(ParallelPoint {
                point: p.clone(),
                sigma: s.value(),
                residual,
                norm,
                h_ii: pair(&(), &h, &iv, &iv),
                h_ii_einstein: -2.0 / n * s.value().powi(2) * vals.j,
                rescaled_tf_schouten: hat.einstein_residual().max_abs() / hat.scale(),
            })
        })
        .collect();
    let pts = pts?;
    let einstein_scale = pts.iter().all(|p| p.residual <= tol.bound(p.norm));
    Ok(ParallelReport { points: pts, einstein_scale })
}

#[derive(Clone, Debug, Serialize)]
pub struct Annihilation {
    /// `X_A I^A`.
    pub sigma: f64,
    pub scale: f64,
    /// `Ω_bc^D_E I^E`.
    pub omega: f64,
    /// `(∇_a Ω_bc^D_E) I^E`.
    pub nabla_omega: f64,
    /// `(∇^a Ω_ab^C_D) I^D`.
    pub div_omega: f64,
    /// `W^{BCD}_E I^E`.
    pub w: f64,
    /// Difference between the `Z` coefficient of `Ω·I` and `σ(A + K·C)`
    /// with `K = −μ/σ`.
    pub cspace_consistency: f64,
}

/// Residuals of the annihilation conditions for a tractor `i` given by its
/// coefficient values at the pack's point.
pub fn annihilation_check(pack: &CurvaturePack<Jet>, i: &[f64]) -> Annihilation {
    let n = pack.dim();
    let vals = pack_values(pack);
    let h = tractor_metric(&vals);
    let om_j = omega(pack);
    let om = om_j.values();
    let nab = tractor_connection(pack, &om_j).values();
    let div = div_omega(pack).values();
    let w = w_tensor(&vals, &om, &div);
    let oi = contract_last(&(), &h, &om, i);
    let sigma = i[0];
    let mut consistency = 0.0f64;
    if sigma != 0.0 {
        let k = Tensor::from_fn(n, vec![Slot::Down], 0, |a| -i[1 + a[0]] / sigma);
        let cs = cspace_residual(&vals, &k);
        for idx in multi_indices(n, 3) {
            let (a, b, c) = (idx[0], idx[1], idx[2]);
            consistency = consistency.max((oi.get(&[a, b, 1 + c]) - sigma * cs.get(&[c, a, b])).abs());
        }
    }
    Annihilation {
        sigma,
        scale: vals.scale(),
        omega: oi.max_abs(),
        nabla_omega: contract_last(&(), &h, &nab, i).max_abs(),
        div_omega: contract_last(&(), &h, &div, i).max_abs(),
        w: contract_last(&(), &h, &w, i).max_abs(),
        cspace_consistency: consistency,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RankPoint {
    pub point: Vec<f64>,
    pub weakly_generic: bool,
    pub rank: usize,
    pub singular_values: Vec<f64>,
    /// Unit kernel vector when the rank is exactly `n+1`.
    pub kernel: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RankReport {
    pub theorem: Theorem,
    pub points: Vec<RankPoint>,
    pub verdict: Verdict,
    pub reason: String,
}

/// Rows `Ω_bc^D_E` (b<c) and `∇_aΩ_bc^D_E` (b<c) as a matrix acting on `I^E`.
pub fn rank_matrix(pack: &CurvaturePack<Jet>) -> DMatrix<f64> {
    let n = pack.dim();
    let vals = pack_values(pack);
    let h = tractor_metric(&vals);
    let om_j = omega(pack);
    let om = om_j.values();
    let nab = tractor_connection(pack, &om_j).values();
    let m = n + 2;
    let lower = |row: Vec<f64>| -> Vec<f64> { (0..m).map(|e| (0..m).map(|f| row[f] * h[f][e]).sum()).collect() };
    let mut rows = Vec::new();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|b| (b + 1..n).map(move |c| (b, c))).collect();
    for &(b, c) in &pairs {
        for d in 0..m {
            rows.push(lower((0..m).map(|f| *om.get(&[b, c, d, f])).collect()));
        }
    }
    for a in 0..n {
        for &(b, c) in &pairs {
            for d in 0..m {
                rows.push(lower((0..m).map(|f| *nab.get(&[a, b, c, d, f])).collect()));
            }
        }
    }
    DMatrix::from_fn(rows.len(), m, |r, c| rows[r][c])
}

/// Tractor rank test: conformally Einstein iff the map has rank at most
/// `n+1` at every point of a weakly generic structure.
pub fn rank_obstruction(metric: &MetricField, points: &[Vec<f64>], tol: &Tolerances) -> Result<RankReport, TractorError> {
    let n = metric.dim();
    let pts: Result<Vec<RankPoint>, TractorError> = points
        .par_iter()
        .map(|p| {
            let pack = CurvaturePack::<Jet>::at_point(metric, p)?;
            let weakly_generic = classify_point(&pack_values(&pack), p, tol).weakly_generic;
            let svd = rank_matrix(&pack).svd(false, true);
            let sv: Vec<f64> = svd.singular_values.iter().copied().collect();
            let smax = sv.iter().fold(0.0f64, |m, v| m.max(*v));
            let rank = sv.iter().filter(|v| **v > tol.rank_tol * smax).count();
            let kernel = (rank == n + 1).then(|| {
                let k = (0..sv.len()).min_by(|a, b| sv[*a].total_cmp(&sv[*b])).unwrap();
                svd.v_t.as_ref().unwrap().row(k).iter().copied().collect()
            });
            let mut sorted = sv;
            sorted.sort_by(|a, b| b.total_cmp(a));
            Ok(RankPoint { point: p.clone(), weakly_generic, rank, singular_values: sorted, kernel })
        })
        .collect();
    let pts = pts?;
    let (verdict, reason) = if !pts.iter().all(|p| p.weakly_generic) {
        (Verdict::Inconclusive, "not weakly generic".to_string())
    } else if pts.iter().any(|p| p.rank == n + 2) {
        (Verdict::NotConformallyEinstein, format!("rank {} at some point", n + 2))
    } else {
        (Verdict::ConformallyEinstein, format!("rank ≤ {} at every point", n + 1))
    };
    Ok(RankReport { theorem: Theorem::TractorRank, points: pts, verdict, reason })
}

/// Residual of `∇̂^aΩ̂_ab − ∇^aΩ_ab − (n−4)Υ^aΩ_ab`, compared in the
/// splitting of `g`, relative to `|∇^aΩ_ab|`.
pub fn div_transform_check(metric: &MetricField, upsilon: &Expr, point: &[f64]) -> Result<f64, TractorError> {
    let n = metric.dim();
    let hat = metric.conformal_rescale(upsilon);
    let pack = CurvaturePack::<Jet>::at_point(metric, point)?;
    let hpack = CurvaturePack::<Jet>::at_point(&hat, point)?;
    let vals = pack_values(&pack);
    let hvals = pack_values(&hpack);
    let u = scalar_jet(metric, upsilon, point, 1)?;
    let uv = u.value();
    let du: Vec<f64> = (0..n).map(|a| u.partial(a).value()).collect();
    let div = div_omega(&pack).values();
    let dhat = div_omega(&hpack).values();
    let minus: Vec<f64> = du.iter().map(|v| -v).collect();
    let back = change_scale(&(), &dhat, &hvals.lc.ginv, &-uv, &minus);
    let om = omega(&vals);
    let k = n as f64 - 4.0;
    let mut worst = 0.0f64;
    for i in indices(&div.shape()) {
        let mut want = *div.get(&i);
        for a in 0..n {
            for p in 0..n {
                want += k * vals.lc.ginv.get(&[a, p]) * du[p] * om.get(&[a, i[0], i[1], i[2]]);
            }
        }
        worst = worst.max((back.get(&i) - want).abs());
    }
    Ok(worst / div.max_abs().max(om.max_abs()).max(f64::MIN_POSITIVE))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    fn pack(name: &str) -> CurvaturePack<f64> {
        let e = catalog::by_name(name).unwrap();
        let p = &e.sample_points(1, 0).unwrap()[0];
        pack_values(&CurvaturePack::<Jet>::at_point(&e.metric, p).unwrap())
    }

    #[test]
    fn projector_table() {
        let vals = pack("rt-quartic4");
        let n = 4;
        let h = tractor_metric(&vals);
        let unit = |k: usize| (0..n + 2).map(|j| if j == k { 1.0 } else { 0.0 }).collect::<Vec<f64>>();
        let (y, x) = (unit(0), unit(n + 1));
        assert_eq!(pair(&(), &h, &y, &x), 1.0);
        assert_eq!(pair(&(), &h, &x, &x), 0.0);
        assert_eq!(pair(&(), &h, &y, &y), 0.0);
        // Z_{Ab} Z^{Ac} = δ_b^c after lowering b with g
        for b in 0..n {
            for c in 0..n {
                let v: f64 = (0..n).map(|d| vals.lc.g.get(&[b, d]) * pair(&(), &h, &unit(1 + d), &unit(1 + c))).sum();
                assert!((v - if b == c { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
            assert_eq!(pair(&(), &h, &unit(1 + b), &x), 0.0);
        }
        let hi = tractor_metric_inverse(&vals);
        for p in 0..n + 2 {
            for q in 0..n + 2 {
                let v: f64 = (0..n + 2).map(|r| h[p][r] * hi.get(&[r, q])).sum();
                assert!((v - if p == q { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_rescaling_is_identity() {
        let vals = pack("schwarzschild");
        let om = omega(&vals);
        let same = change_scale(&(), &om, &vals.lc.ginv, &0.0, &[0.0; 4]);
        assert_eq!(same.sub(&om).max_abs(), 0.0);
    }

    #[test]
    fn d_of_constant_weight_zero_vanishes() {
        let e = catalog::by_name("rt-quartic4").unwrap();
        let p = &e.sample_points(1, 0).unwrap()[0];
        let pk = CurvaturePack::<Jet>::at_point(&e.metric, p).unwrap();
        let f = Jet::constant(pk.ctx(), 2.5);
        let d = tractor_d(&pk, &f, 0);
        assert!(d.values().max_abs() == 0.0);
    }
}
