//! Tensorial obstructions to being conformally Einstein and the decision
//! pipeline built on them.
//!
//! Everything here is evaluated pointwise on a [`CurvaturePack`]. The
//! contractions are generic over the scalar type so that the same code runs
//! on values, on jets (when a derivative of the result is needed) and on
//! expressions.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::curvature::{CurvaturePack, Tolerances};
use crate::genericity::{auto_dual, classify_point, dual_candidate, pack_values, weyl_up, DualCandidate, GenericityError, LOperator, PointGenericity, Policy, WeylOperator};
use crate::geometry::{GeometryError, MetricField, Slot, Tensor};
use crate::jet::Jet;
use crate::linalg::Adjugate;
use crate::scalar::Scalar;

/// Relative size above which a residual counts as a genuine nonzero.
pub const NONZERO: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ObstructionError {
    #[error("{what} needs dimension {need}, got {got}")]
    Dimension { what: &'static str, need: &'static str, got: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Genericity(#[from] GenericityError),
    #[error("internal inconsistency: {0}")]
    Inconsistent(String),
}

fn zero<S: Scalar>(ctx: &S::Ctx) -> S {
    S::constant(ctx, 0.0)
}

/// Max-norm through [`Scalar::approx`]; NaN when a value is unknown.
pub fn norm<S: Scalar>(t: &Tensor<S>) -> f64 {
    t.data.iter().map(|v| v.approx().map_or(f64::NAN, f64::abs)).fold(0.0, f64::max)
}

/// `X_a = T_a^cde A_cde`, slot 0 of `t` kept as is.
fn contract_tail<S: Scalar>(ctx: &S::Ctx, t: &Tensor<S>, a: &Tensor<S>) -> Tensor<S> {
    let n = t.dim;
    let n3 = n * n * n;
    Tensor::from_fn(n, vec![t.slots[0]], t.weight + a.weight, |i| {
        let row = &t.data[i[0] * n3..(i[0] + 1) * n3];
        let mut acc = zero::<S>(ctx);
        for (x, y) in row.iter().zip(&a.data) {
            if !x.is_zero() && !y.is_zero() {
                acc = acc.add(&x.mul(y));
            }
        }
        acc
    })
}

/// `V^d C_dabc` for an upper-index `v`.
pub fn vector_into_weyl<S: Scalar>(ctx: &S::Ctx, v: &Tensor<S>, c: &Tensor<S>) -> Tensor<S> {
    let n = c.dim;
    Tensor::from_fn(n, vec![Slot::Down; 3], c.weight + v.weight, |i| {
        let mut acc = zero::<S>(ctx);
        for d in 0..n {
            let x = v.get(&[d]);
            if !x.is_zero() {
                let y = c.get(&[d, i[0], i[1], i[2]]);
                if !y.is_zero() {
                    acc = acc.add(&x.mul(y));
                }
            }
        }
        acc
    })
}

fn gradient<S: Scalar>(ctx: &S::Ctx, n: usize, f: &S, weight: i32) -> Tensor<S> {
    Tensor::from_fn(n, vec![Slot::Down], weight, |i| f.partial(ctx, i[0]))
}

fn raised<S: Scalar>(pack: &CurvaturePack<S>, k: &Tensor<S>) -> Tensor<S> {
    pack.lc.raise(k, 0).expect("covector")
}

/// `A_abc + K^d C_dabc`, the conformally invariant C-space residual.
pub fn cspace_residual<S: Scalar>(pack: &CurvaturePack<S>, k: &Tensor<S>) -> Tensor<S> {
    let kc = vector_into_weyl(pack.ctx(), &raised(pack, k), &pack.weyl);
    pack.cotton.add(&kc.with_weight(0))
}

/// `B_ab + (n−4) K^d K^c C_dabc`.
pub fn bach_residual<S: Scalar>(pack: &CurvaturePack<S>, k: &Tensor<S>) -> Tensor<S> {
    let n = pack.dim();
    let ctx = pack.ctx();
    if n == 4 {
        return pack.bach.clone();
    }
    let ku = raised(pack, k);
    let kc = vector_into_weyl(ctx, &ku, &pack.weyl);
    let term = Tensor::from_fn(n, vec![Slot::Down; 2], pack.bach.weight, |i| {
        let mut acc = zero::<S>(ctx);
        for c in 0..n {
            let x = ku.get(&[c]);
            if !x.is_zero() {
                acc = acc.add(&x.mul(kc.get(&[i[0], i[1], c])));
            }
        }
        acc
    });
    pack.bach.add(&term.scale(ctx, n as f64 - 4.0))
}

/// `v^d = C̃^defg A_efg`.
fn ctilde_on_cotton<S: Adjugate>(pack: &CurvaturePack<S>, w: &WeylOperator<S>) -> Tensor<S> {
    let up = pack.lc.with_slots(&w.tilde, &[Slot::Up; 4]).expect("rank 4");
    contract_tail(pack.ctx(), &up, &pack.cotton)
}

fn need_dim(what: &'static str, n: usize, ok: bool, need: &'static str) -> Result<(), ObstructionError> {
    if ok {
        Ok(())
    } else {
        Err(ObstructionError::Dimension { what, need, got: n })
    }
}

/// `F¹_abc = (1−n)‖C‖A_abc + 2 C_dabc C̃^defg A_efg`.
pub fn f1<S: Adjugate>(pack: &CurvaturePack<S>, w: &WeylOperator<S>) -> Result<Tensor<S>, ObstructionError> {
    let n = pack.dim();
    need_dim("F1", n, n >= 4, "n ≥ 4")?;
    let ctx = pack.ctx();
    let v = ctilde_on_cotton(pack, w);
    let t = vector_into_weyl(ctx, &v, &pack.weyl).scale(ctx, 2.0);
    let a = pack.cotton.times(&w.det).scale(ctx, 1.0 - n as f64);
    Ok(a.add(&t.with_weight(a.weight)))
}

/// `F²_ab = (n−1)²‖C‖² B_ab + 4(n−4) C̃^defg C_dabc C̃^chkl A_efg A_hkl`.
pub fn f2<S: Adjugate>(pack: &CurvaturePack<S>, w: &WeylOperator<S>) -> Result<Tensor<S>, ObstructionError> {
    let n = pack.dim();
    need_dim("F2", n, n >= 4, "n ≥ 4")?;
    let ctx = pack.ctx();
    let nf = n as f64;
    let v = ctilde_on_cotton(pack, w);
    let vc = vector_into_weyl(ctx, &v, &pack.weyl);
    let quad = Tensor::from_fn(n, vec![Slot::Down; 2], 0, |i| {
        let mut acc = zero::<S>(ctx);
        for c in 0..n {
            acc = acc.add(&v.get(&[c]).mul(vc.get(&[i[0], i[1], c])));
        }
        acc
    });
    let b = pack.bach.times(&w.det.mul(&w.det)).scale(ctx, (nf - 1.0) * (nf - 1.0));
    Ok(b.add(&quad.scale(ctx, 4.0 * (nf - 4.0)).with_weight(b.weight)))
}

/// Pieces of `E_ab = TF[P_ab − ∇_a K_b + K_a K_b]` with `K = D̃·A`.
#[derive(Clone, Debug)]
pub struct EParts<S: Scalar> {
    pub k: Tensor<S>,
    /// `P − ∇K + K⊗K` before projection.
    pub bracket: Tensor<S>,
    pub e: Tensor<S>,
}

impl<S: Scalar> EParts<S> {
    /// Skew part of the bracket.
    pub fn skew(&self, ctx: &S::Ctx) -> Tensor<S> {
        let n = self.bracket.dim;
        let b = &self.bracket;
        Tensor::from_fn(n, b.slots.clone(), b.weight, |i| b.get(i).sub(b.get(&[i[1], i[0]])).scale(ctx, 0.5))
    }
}

/// `E_ab` from a dual candidate. Needs one derivative of `K`, so jets must
/// carry first-order information in `D̃` and `A`.
pub fn e_tensor<S: Scalar>(pack: &CurvaturePack<S>, dual: &DualCandidate<S>) -> EParts<S> {
    let k = dual.k_field(pack);
    e_from_k(pack, k)
}

/// `E_ab` for a given one-form `K`.
pub fn e_from_k<S: Scalar>(pack: &CurvaturePack<S>, k: Tensor<S>) -> EParts<S> {
    let lc = &pack.lc;
    let nk = lc.nabla(&k);
    let kk = k.outer(&k);
    let bracket = pack.schouten.sub(&nk.with_weight(0)).add(&kk.with_weight(0));
    let e = lc.trace_free(&bracket);
    EParts { k, bracket, e }
}

fn trace_free_sum<S: Scalar>(pack: &CurvaturePack<S>, terms: &[Tensor<S>]) -> Tensor<S> {
    let mut acc = terms[0].clone();
    for t in &terms[1..] {
        acc = acc.add(&t.clone().with_weight(acc.weight));
    }
    pack.lc.trace_free(&acc)
}

/// `G_ab = TF[‖L‖²P − ‖L‖∇_a(D·A)_b + (∇_a‖L‖)(D·A)_b + (D·A)_a(D·A)_b]`,
/// `D^acde = −L̃^a_b C^bcde`.
pub fn g_tensor<S: Adjugate>(pack: &CurvaturePack<S>) -> Result<Tensor<S>, ObstructionError> {
    let n = pack.dim();
    need_dim("G", n, n >= 4, "n ≥ 4")?;
    let ctx = pack.ctx();
    let l = LOperator::new(pack);
    let cu = weyl_up(pack);
    let ca = contract_tail(ctx, &cu, &pack.cotton);
    let da_up = Tensor::from_fn(n, vec![Slot::Up], 0, |i| {
        let mut acc = zero::<S>(ctx);
        for b in 0..n {
            acc = acc.sub(&l.adjugate[i[0]][b].mul(ca.get(&[b])));
        }
        acc
    });
    let da = pack.lc.lower(&da_up, 0).expect("upper");
    let det2 = l.det.mul(&l.det);
    Ok(trace_free_sum(
        pack,
        &[
            pack.schouten.times(&det2),
            pack.lc.nabla(&da).times(&l.det).scale(ctx, -1.0),
            gradient(ctx, n, &l.det, 0).outer(&da),
            da.outer(&da),
        ],
    ))
}

/// `Ḡ_ab = TF[(1−n)²‖C‖²P − 2(1−n)‖C‖∇_a(C̃·A)_b + 2(1−n)(∇_a‖C‖)(C̃·A)_b
/// + 4(C̃·A)_a(C̃·A)_b]`.
pub fn gbar_tensor<S: Adjugate>(pack: &CurvaturePack<S>) -> Result<Tensor<S>, ObstructionError> {
    let n = pack.dim();
    need_dim("Gbar", n, n >= 4, "n ≥ 4")?;
    let ctx = pack.ctx();
    let m = 1.0 - n as f64;
    let w = WeylOperator::new(pack);
    let t = pack.lc.raise(&w.tilde, 1).expect("lower slot");
    let ca = contract_tail(ctx, &t, &pack.cotton);
    Ok(trace_free_sum(
        pack,
        &[
            pack.schouten.times(&w.det.mul(&w.det)).scale(ctx, m * m),
            pack.lc.nabla(&ca).times(&w.det).scale(ctx, -2.0 * m),
            gradient(ctx, n, &w.det, 0).outer(&ca).scale(ctx, 2.0 * m),
            ca.outer(&ca).scale(ctx, 4.0),
        ],
    ))
}

/// `|C|² = C^abcd C_abcd`.
pub fn weyl_square<S: Scalar>(pack: &CurvaturePack<S>) -> S {
    let cu = weyl_up(pack);
    let mut acc = zero::<S>(pack.ctx());
    for (x, y) in cu.data.iter().zip(&pack.weyl.data) {
        if !x.is_zero() && !y.is_zero() {
            acc = acc.add(&x.mul(y));
        }
    }
    acc
}

/// `TF[(|C|²)²P + 4|C|²∇_a(C·A)_b − 4(∇_a|C|²)(C·A)_b + 16(C·A)_a(C·A)_b]`
/// with `(C·A)_b = C_b^cde A_cde`; dimension 4 only.
pub fn dim4_invariant<S: Scalar>(pack: &CurvaturePack<S>) -> Result<Tensor<S>, ObstructionError> {
    let n = pack.dim();
    need_dim("dim4 invariant", n, n == 4, "n = 4")?;
    let ctx = pack.ctx();
    let c2 = weyl_square(pack);
    let cd = pack.lc.with_slots(&pack.weyl, &[Slot::Down, Slot::Up, Slot::Up, Slot::Up]).expect("rank 4");
    let ca = contract_tail(ctx, &cd, &pack.cotton);
    Ok(trace_free_sum(
        pack,
        &[
            pack.schouten.times(&c2.mul(&c2)),
            pack.lc.nabla(&ca).times(&c2).scale(ctx, 4.0),
            gradient(ctx, n, &c2, 0).outer(&ca).scale(ctx, -4.0),
            ca.outer(&ca).scale(ctx, 16.0),
        ],
    ))
}

/// `‖L‖A_abc − C^efgh A_fgh L̃^d_e C_dabc`.
pub fn l_cotton_invariant<S: Adjugate>(pack: &CurvaturePack<S>) -> Tensor<S> {
    let n = pack.dim();
    let ctx = pack.ctx();
    let l = LOperator::new(pack);
    let w = contract_tail(ctx, &weyl_up(pack), &pack.cotton);
    let u = Tensor::from_fn(n, vec![Slot::Up], 0, |i| {
        let mut acc = zero::<S>(ctx);
        for e in 0..n {
            acc = acc.add(&l.adjugate[i[0]][e].mul(w.get(&[e])));
        }
        acc
    });
    let a = pack.cotton.times(&l.det);
    a.sub(&vector_into_weyl(ctx, &u, &pack.weyl).with_weight(a.weight))
}

/// `|C|²A_abc − 4 C^defg A_efg C_dabc`, dimension 4.
pub fn dim4_cotton_invariant<S: Scalar>(pack: &CurvaturePack<S>) -> Result<Tensor<S>, ObstructionError> {
    let n = pack.dim();
    need_dim("dim4 Cotton invariant", n, n == 4, "n = 4")?;
    let ctx = pack.ctx();
    let w = contract_tail(ctx, &weyl_up(pack), &pack.cotton);
    let a = pack.cotton.times(&weyl_square(pack));
    Ok(a.sub(&vector_into_weyl(ctx, &w, &pack.weyl).scale(ctx, 4.0).with_weight(a.weight)))
}

/// Single exponent `w` with `b ≈ e^{wΥ} a` componentwise, fitted over
/// components above `floor · max|a|`. Returns `(mean, spread)`.
pub fn fit_exponent(a: &Tensor<f64>, b: &Tensor<f64>, upsilon: f64, floor: f64) -> Option<(f64, f64)> {
    let cut = floor * a.max_abs();
    let ws: Vec<f64> = a
        .data
        .iter()
        .zip(&b.data)
        .filter(|(x, y)| x.abs() > cut && y.abs() > 0.0 && x.signum() == y.signum())
        .map(|(x, y)| (y / x).ln() / upsilon)
        .collect();
    if ws.is_empty() || upsilon == 0.0 {
        return None;
    }
    let mean = ws.iter().sum::<f64>() / ws.len() as f64;
    let spread = ws.iter().fold(0.0f64, |m, w| m.max((w - mean).abs()));
    Some((mean, spread))
}

/// Stable identifiers of the criteria a verdict can rest on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Theorem {
    /// Dimension 3: conformally Einstein iff the Cotton tensor vanishes.
    #[serde(rename = "dim3-cotton")]
    Dim3Cotton,
    /// Weakly generic: `E_ab = 0`.
    #[serde(rename = "weakly-generic-E")]
    WeaklyGenericE,
    /// `‖L‖ ≠ 0`: `G_ab = 0`.
    #[serde(rename = "nonzero-L-G")]
    NonzeroLG,
    /// Λ²-generic: `Ḡ_ab = 0`.
    #[serde(rename = "lambda2-Gbar")]
    Lambda2Gbar,
    /// Dimension 4 with `|C|² ≠ 0`.
    #[serde(rename = "dim4-weyl-square")]
    Dim4WeylSquare,
    /// Generic: `F¹ = 0` and `F² = 0`.
    #[serde(rename = "generic-F1F2")]
    GenericF1F2,
    /// Tractor curvature rank test.
    #[serde(rename = "tractor-rank")]
    TractorRank,
}

impl Theorem {
    pub fn id(self) -> &'static str {
        match self {
            Theorem::Dim3Cotton => "dim3-cotton",
            Theorem::WeaklyGenericE => "weakly-generic-E",
            Theorem::NonzeroLG => "nonzero-L-G",
            Theorem::Lambda2Gbar => "lambda2-Gbar",
            Theorem::Dim4WeylSquare => "dim4-weyl-square",
            Theorem::GenericF1F2 => "generic-F1F2",
            Theorem::TractorRank => "tractor-rank",
        }
    }

    pub fn precondition(self) -> &'static str {
        match self {
            Theorem::Dim3Cotton => "dimension 3",
            Theorem::WeaklyGenericE => "weakly generic with a valid dual tensor",
            Theorem::NonzeroLG => "‖L‖ ≠ 0",
            Theorem::Lambda2Gbar => "Λ²-generic",
            Theorem::Dim4WeylSquare => "dimension 4 and |C|² ≠ 0",
            Theorem::GenericF1F2 => "generic",
            Theorem::TractorRank => "weakly generic",
        }
    }
}

impl std::fmt::Display for Theorem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    ConformallyEinstein,
    NotConformallyEinstein,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::ConformallyEinstein => "conformally Einstein",
            Verdict::NotConformallyEinstein => "not conformally Einstein",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

/// A max-norm together with the size it is judged against.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Residual {
    pub norm: f64,
    pub scale: f64,
}

impl Residual {
    pub fn new(norm: f64, scale: f64) -> Residual {
        Residual { norm, scale }
    }

    pub fn relative(&self) -> f64 {
        self.norm / self.scale
    }

    pub fn vanishes(&self, tol: &Tolerances) -> bool {
        self.norm <= tol.bound(self.scale)
    }

    pub fn nonzero(&self) -> bool {
        self.norm > NONZERO * self.scale
    }
}

/// Everything computed at one sample point.
#[derive(Clone, Debug, Serialize)]
pub struct PointObstructions {
    pub point: Vec<f64>,
    pub scale: f64,
    pub genericity: PointGenericity,
    /// Policy that produced `k`, if any did.
    pub policy: Option<Policy>,
    pub k: Option<Vec<f64>>,
    pub residuals: BTreeMap<String, Residual>,
    /// Theorems whose precondition holds here.
    pub applicable: Vec<Theorem>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TheoremVerdict {
    pub theorem: Theorem,
    pub precondition: &'static str,
    pub verdict: Verdict,
    /// Points where the precondition held.
    pub applicable_points: usize,
    pub worst_relative: Option<f64>,
}

/// Numeric potential `Υ` with `K = dΥ`, relative to the first point.
#[derive(Clone, Debug, Serialize)]
pub struct Potential {
    pub closedness: f64,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ObstructionReport {
    pub dim: usize,
    pub points: Vec<PointObstructions>,
    pub theorems: Vec<TheoremVerdict>,
    pub verdict: Verdict,
    pub decided_by: Option<Theorem>,
    pub reason: String,
    pub notes: Vec<String>,
    pub potential: Option<Result<Potential, String>>,
}

#[derive(Clone, Copy, Debug)]
pub struct PipelineOptions {
    /// `None` tries from-L, from-C and dim4-C3 in turn.
    pub policy: Option<Policy>,
    pub tol: Tolerances,
    pub potential: bool,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions { policy: None, tol: Tolerances::default(), potential: true }
    }
}

fn dual_for(pack: &CurvaturePack<Jet>, policy: Option<Policy>, tol: &Tolerances, label: &str) -> Result<DualCandidate<Jet>, GenericityError> {
    match policy {
        Some(p) => dual_candidate(pack, p, tol, label),
        None => auto_dual(pack, tol, label),
    }
}

fn values(t: &Tensor<Jet>) -> Tensor<f64> {
    t.values()
}

/// Size of the terms that cancel in `E` for a given `K`.
fn e_scale(scale: f64, parts: &EParts<Jet>, pack: &CurvaturePack<Jet>) -> f64 {
    let k = values(&parts.k).max_abs();
    let nk = values(&pack.lc.nabla(&parts.k)).max_abs();
    scale.max(k * k).max(nk)
}

/// Evaluates every applicable invariant at one point.
pub fn evaluate_point(metric: &MetricField, point: &[f64], opts: &PipelineOptions) -> Result<PointObstructions, ObstructionError> {
    let tol = &opts.tol;
    let pack = CurvaturePack::<Jet>::at_point(metric, point)?;
    let vals = pack_values(&pack);
    let n = pack.dim();
    let nf = n as f64;
    let scale = vals.scale();
    let genericity = classify_point(&vals, point, tol);
    let mut residuals = BTreeMap::new();
    let mut applicable = Vec::new();
    let label = metric.chart.format_point(point);
    residuals.insert("einstein".into(), Residual::new(vals.einstein_residual().max_abs(), scale));
    residuals.insert("cotton".into(), Residual::new(vals.cotton.max_abs(), scale));

    if n == 3 {
        applicable.push(Theorem::Dim3Cotton);
        return Ok(PointObstructions { point: point.to_vec(), scale, genericity, policy: None, k: None, residuals, applicable });
    }

    let dual = dual_for(&pack, opts.policy, tol, &label).ok();
    let mut k_out = None;
    if let Some(d) = &dual {
        let parts = e_tensor(&pack, d);
        let es = e_scale(scale, &parts, &pack);
        let kv = values(&parts.k);
        let ku = vals.lc.raise(&kv, 0).expect("covector");
        let kc = vector_into_weyl(&(), &ku, &vals.weyl).max_abs();
        residuals.insert("cspace".into(), Residual::new(cspace_residual(&vals, &kv).max_abs(), scale.max(kc)));
        let br = bach_residual(&vals, &kv);
        residuals.insert("bach".into(), Residual::new(br.max_abs(), scale.max(vals.bach.max_abs()).max(kc * kv.max_abs())));
        residuals.insert("E".into(), Residual::new(values(&parts.e).max_abs(), es));
        // the skew part of the bracket is −∂_[a K_b]
        let dk = gradient_skew(&parts.k);
        let skew = values(&parts.skew(pack.ctx()));
        residuals.insert("closedness".into(), Residual::new(dk.max_abs(), es));
        residuals.insert("closedness_vs_skew".into(), Residual::new(skew.add(&dk).max_abs(), es));
        if genericity.weakly_generic {
            applicable.push(Theorem::WeaklyGenericE);
        }
        k_out = Some((d.policy, kv.data.clone()));
    }

    let from_l = dual_candidate(&pack, Policy::FromL, tol, &label).ok();
    let gt = values(&g_tensor(&pack)?);
    let l = LOperator::new(&pack);
    let ldet = l.det.value();
    if let Some(d) = &from_l {
        let parts = e_tensor(&pack, d);
        let es = e_scale(scale, &parts, &pack);
        let s = ldet * ldet * es;
        residuals.insert("G".into(), Residual::new(gt.max_abs(), s));
        let scaled = values(&parts.e).scale(&(), ldet * ldet);
        residuals.insert("G_vs_E".into(), Residual::new(gt.sub(&scaled).max_abs(), s));
        applicable.push(Theorem::NonzeroLG);
    }

    let w = WeylOperator::new(&pack);
    let cdet = w.det.value();
    let from_c = dual_candidate(&pack, Policy::FromC, tol, &label).ok();
    let gb = values(&gbar_tensor(&pack)?);
    if let Some(d) = &from_c {
        let parts = e_tensor(&pack, d);
        let es = e_scale(scale, &parts, &pack);
        let f = (1.0 - nf).powi(2) * cdet * cdet;
        residuals.insert("Gbar".into(), Residual::new(gb.max_abs(), f.abs() * es));
        let scaled = values(&parts.e).scale(&(), f);
        residuals.insert("Gbar_vs_E".into(), Residual::new(gb.sub(&scaled).max_abs(), f.abs() * es));
        if genericity.lambda2_generic {
            applicable.push(Theorem::Lambda2Gbar);
        }
        if genericity.generic {
            let wv = WeylOperator { matrix: Vec::new(), det: cdet, tilde: w.tilde.values() };
            let kv = values(&parts.k);
            let ku = vals.lc.raise(&kv, 0).expect("covector");
            let kc = vector_into_weyl(&(), &ku, &vals.weyl).max_abs();
            let f1v = f1(&vals, &wv)?;
            let f2v = f2(&vals, &wv)?;
            let s1 = (nf - 1.0) * cdet.abs() * scale.max(kc);
            let s2 = f.abs() * scale.max(vals.bach.max_abs()).max(kc * kv.max_abs());
            residuals.insert("F1".into(), Residual::new(f1v.max_abs(), s1));
            residuals.insert("F2".into(), Residual::new(f2v.max_abs(), s2));
            let br = bach_residual(&vals, &kv).scale(&(), f);
            residuals.insert("F2_vs_bach".into(), Residual::new(f2v.sub(&br).max_abs(), s2));
            applicable.push(Theorem::GenericF1F2);
        }
    }

    if n == 4 {
        let c2 = weyl_square(&pack).value();
        let d4 = values(&dim4_invariant(&pack)?);
        if from_l.is_some() {
            let k = contract_tail(pack.ctx(), &pack.lc.with_slots(&pack.weyl, &[Slot::Down, Slot::Up, Slot::Up, Slot::Up]).unwrap(), &pack.cotton);
            let parts = e_from_k(&pack, k.scale(pack.ctx(), -4.0 / c2));
            let es = e_scale(scale, &parts, &pack);
            residuals.insert("dim4".into(), Residual::new(d4.max_abs(), c2 * c2 * es));
            applicable.push(Theorem::Dim4WeylSquare);
        }
    }

    Ok(PointObstructions { point: point.to_vec(), scale, genericity, policy: k_out.as_ref().map(|k| k.0), k: k_out.map(|k| k.1), residuals, applicable })
}

/// `−½(∂_a K_b − ∂_b K_a)` at the point.
fn gradient_skew(k: &Tensor<Jet>) -> Tensor<f64> {
    let n = k.dim;
    Tensor::from_fn(n, vec![Slot::Down; 2], 0, |i| -0.5 * (k.get(&[i[1]]).partial(i[0]).value() - k.get(&[i[0]]).partial(i[1]).value()))
}

fn theorem_residuals(t: Theorem) -> &'static [&'static str] {
    match t {
        Theorem::Dim3Cotton => &["cotton"],
        Theorem::WeaklyGenericE => &["E"],
        Theorem::NonzeroLG => &["G"],
        Theorem::Lambda2Gbar => &["Gbar"],
        Theorem::Dim4WeylSquare => &["dim4"],
        Theorem::GenericF1F2 => &["F1", "F2"],
        Theorem::TractorRank => &[],
    }
}

/// Verdict of one theorem over all points: "not" needs a clearly nonzero
/// residual at an applicable point, "yes" needs the precondition and a
/// vanishing residual everywhere.
pub fn judge(theorem: Theorem, points: &[PointObstructions], tol: &Tolerances) -> TheoremVerdict {
    let names = theorem_residuals(theorem);
    let mut applicable = 0;
    let mut worst: Option<f64> = None;
    let mut nonzero = false;
    let mut all_vanish = true;
    for p in points {
        if !p.applicable.contains(&theorem) {
            all_vanish = false;
            continue;
        }
        applicable += 1;
        for name in names {
            let r = &p.residuals[*name];
            worst = Some(worst.map_or(r.relative(), |w: f64| w.max(r.relative())));
            nonzero |= r.nonzero();
            all_vanish &= r.vanishes(tol);
        }
    }
    let verdict = if nonzero {
        Verdict::NotConformallyEinstein
    } else if applicable > 0 && all_vanish {
        Verdict::ConformallyEinstein
    } else {
        Verdict::Inconclusive
    };
    TheoremVerdict { theorem, precondition: theorem.precondition(), verdict, applicable_points: applicable, worst_relative: worst }
}

const ORDER: [Theorem; 6] =
    [Theorem::Dim3Cotton, Theorem::WeaklyGenericE, Theorem::NonzeroLG, Theorem::Lambda2Gbar, Theorem::Dim4WeylSquare, Theorem::GenericF1F2];

/// Combines per-theorem verdicts; conflicting conclusive verdicts are an
/// internal error.
pub fn combine(theorems: &[TheoremVerdict]) -> Result<(Verdict, Option<Theorem>), ObstructionError> {
    let yes: Vec<_> = theorems.iter().filter(|t| t.verdict == Verdict::ConformallyEinstein).collect();
    let no: Vec<_> = theorems.iter().filter(|t| t.verdict == Verdict::NotConformallyEinstein).collect();
    if let (Some(y), Some(n)) = (yes.first(), no.first()) {
        return Err(ObstructionError::Inconsistent(format!("{} says conformally Einstein but {} says not", y.theorem, n.theorem)));
    }
    Ok(match theorems.iter().find(|t| t.verdict != Verdict::Inconclusive) {
        Some(t) => (t.verdict, Some(t.theorem)),
        None => (Verdict::Inconclusive, None),
    })
}

/// Full tensor-level pipeline over the given points.
pub fn conformal_einstein_tensor_verdict(metric: &MetricField, points: &[Vec<f64>], opts: &PipelineOptions) -> Result<ObstructionReport, ObstructionError> {
    let n = metric.dim();
    let evaluated: Result<Vec<_>, _> = points.par_iter().map(|p| evaluate_point(metric, p, opts)).collect();
    let evaluated = evaluated?;
    let theorems: Vec<TheoremVerdict> =
        ORDER.iter().filter(|t| (n == 3) == (**t == Theorem::Dim3Cotton)).map(|&t| judge(t, &evaluated, &opts.tol)).collect();
    let (verdict, decided_by) = combine(&theorems)?;
    let mut notes = Vec::new();
    let tol = &opts.tol;
    if evaluated.iter().all(|p| p.residuals["einstein"].vanishes(tol)) {
        notes.push("the metric itself is Einstein at every sample point".to_string());
    }
    if n > 3 && evaluated.iter().all(|p| p.residuals["cotton"].vanishes(tol)) {
        notes.push("A = 0 at every sample point".to_string());
    }
    let reason = match (verdict, decided_by) {
        (_, Some(t)) => format!("decided by {t}"),
        _ if n > 3 && !evaluated.iter().all(|p| p.genericity.weakly_generic) => "not weakly generic".to_string(),
        _ if n > 3 && evaluated.iter().any(|p| p.policy.is_none()) => "no dual tensor satisfies its precondition".to_string(),
        _ => "residuals are neither clearly zero nor clearly nonzero".to_string(),
    };
    let potential = (opts.potential && verdict == Verdict::ConformallyEinstein && n > 3)
        .then(|| reconstruct_potential(metric, points, &evaluated, opts).map_err(|e| e.to_string()));
    Ok(ObstructionReport { dim: n, points: evaluated, theorems, verdict, decided_by, reason, notes, potential })
}

/// `K` alone at a point, from order-3 jets.
pub fn k_at(metric: &MetricField, point: &[f64], policy: Option<Policy>, tol: &Tolerances) -> Result<Vec<f64>, ObstructionError> {
    let pack = CurvaturePack::<Jet>::at_point_order(metric, point, 3)?;
    let d = dual_for(&pack, policy, tol, &metric.chart.format_point(point))?;
    Ok(d.k_field(&pack).values().data)
}

/// Simpson steps per axis-parallel segment.
pub const SIMPSON_STEPS: usize = 64;

/// Integrates `K` along axis-parallel paths from the first point. The
/// integral is only meaningful when `K` is closed, which is checked first.
pub fn reconstruct_potential(
    metric: &MetricField,
    points: &[Vec<f64>],
    evaluated: &[PointObstructions],
    opts: &PipelineOptions,
) -> Result<Potential, ObstructionError> {
    let tol = &opts.tol;
    let closed = evaluated.iter().map(|p| p.residuals.get("closedness").map_or(f64::NAN, Residual::relative)).fold(0.0, f64::max);
    if !(closed <= tol.tol_rel.sqrt()) {
        return Err(ObstructionError::Inconsistent(format!("K is not closed (relative skew derivative {closed:e})")));
    }
    let policy = evaluated.first().and_then(|p| p.policy);
    let start = &points[0];
    let values: Result<Vec<f64>, ObstructionError> = points
        .par_iter()
        .map(|end| {
            let mut cur = start.clone();
            let mut total = 0.0;
            for axis in 0..start.len() {
                let (a, b) = (cur[axis], end[axis]);
                if a != b {
                    let h = (b - a) / SIMPSON_STEPS as f64;
                    let mut acc = 0.0;
                    for s in 0..=SIMPSON_STEPS {
                        let mut q = cur.clone();
                        q[axis] = a + h * s as f64;
                        let w = if s == 0 || s == SIMPSON_STEPS { 1.0 } else if s % 2 == 1 { 4.0 } else { 2.0 };
                        acc += w * k_at(metric, &q, policy, tol)?[axis];
                    }
                    total += acc * h / 3.0;
                }
                cur[axis] = b;
            }
            Ok(total)
        })
        .collect();
    Ok(Potential { closedness: closed, values: values? })
}

/// Conformal-to-Cotton data at one point.
#[derive(Clone, Debug, Serialize)]
pub struct CottonScalePoint {
    pub point: Vec<f64>,
    pub policy: Policy,
    pub cspace: Residual,
    pub closedness: Residual,
    /// `‖L‖A − C^efgh A_fgh L̃^d_e C_d···`, judged against `‖L‖·scale`.
    pub l_invariant: Residual,
    /// `|C|²A − 4C^defg A_efg C_d···` in dimension 4.
    pub dim4_invariant: Option<Residual>,
    pub conformal_cspace: bool,
}

/// Whether the metric is conformal to one with vanishing Cotton tensor:
/// `A + K·C = 0` with `K` closed.
pub fn cotton_scale_verdict(
    metric: &MetricField,
    points: &[Vec<f64>],
    policy: Option<Policy>,
    tol: &Tolerances,
) -> Result<Vec<CottonScalePoint>, ObstructionError> {
    points
        .par_iter()
        .map(|p| {
            let pack = CurvaturePack::<Jet>::at_point(metric, p)?;
            let vals = pack_values(&pack);
            let scale = vals.scale();
            let d = dual_for(&pack, policy, tol, &metric.chart.format_point(p))?;
            let parts = e_tensor(&pack, &d);
            let kv = parts.k.values();
            let ku = vals.lc.raise(&kv, 0).expect("covector");
            let kc = vector_into_weyl(&(), &ku, &vals.weyl).max_abs();
            let cspace = Residual::new(cspace_residual(&vals, &kv).max_abs(), scale.max(kc));
            let closedness = Residual::new(gradient_skew(&parts.k).max_abs(), e_scale(scale, &parts, &pack));
            let l = LOperator::new(&vals);
            let l_invariant = Residual::new(l_cotton_invariant(&vals).max_abs(), l.det.abs() * scale.max(kc));
            let dim4_invariant = (vals.dim() == 4).then(|| {
                let c2 = weyl_square(&vals);
                Residual::new(dim4_cotton_invariant(&vals).expect("dimension 4").max_abs(), c2.abs() * scale.max(kc))
            });
            let conformal_cspace = cspace.vanishes(tol) && closedness.vanishes(tol);
            Ok(CottonScalePoint { point: p.clone(), policy: d.policy, cspace, closedness, l_invariant, dim4_invariant, conformal_cspace })
        })
        .collect()
}
