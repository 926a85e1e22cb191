//! Riemann, Ricci, Schouten, Weyl, Cotton and Bach tensors, plus the
//! residual harness for the identities they satisfy.
//!
//! Conventions: `(∇_a∇_b − ∇_b∇_a)V^c = R_ab^c_d V^d`, `R_ab = R_ca^c_b`,
//! `R_ab = (n−2)P_ab + J g_ab`, `A_abc = ∇_b P_ca − ∇_c P_ba`,
//! `B_ab = ∇^c A_acb + P^dc C_dacb`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::expr::Expr;
use crate::geometry::{GeometryError, LeviCivita, MetricField, Slot, Tensor};
use crate::jet::Jet;
use crate::scalar::Scalar;

/// Jet order of metric components needed for the Bach tensor.
pub const METRIC_ORDER: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub tol_rel: f64,
    pub tol_abs: f64,
    pub rank_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { tol_rel: 1e-8, tol_abs: 1e-12, rank_tol: 1e-8 }
    }
}

impl Tolerances {
    pub fn bound(&self, scale: f64) -> f64 {
        self.tol_rel * scale + self.tol_abs
    }
}

#[derive(Clone, Debug)]
pub struct CurvaturePack<S: Scalar> {
    pub lc: LeviCivita<S>,
    /// `R_ab^c_d`.
    pub riemann: Tensor<S>,
    pub ricci: Tensor<S>,
    pub scalar: S,
    pub schouten: Tensor<S>,
    pub j: S,
    /// `C_abcd`, all indices down.
    pub weyl: Tensor<S>,
    pub cotton: Tensor<S>,
    pub bach: Tensor<S>,
}

fn riemann_from<S: Scalar>(lc: &LeviCivita<S>, truncate: impl Fn(&S) -> S) -> Tensor<S> {
    let n = lc.dim;
    let ctx = &lc.ctx;
    let dgam = lc.gamma.partial(ctx);
    let gam = lc.gamma.map(&truncate);
    Tensor::from_fn(n, vec![Slot::Down, Slot::Down, Slot::Up, Slot::Down], 0, |i| {
        let (a, b, c, d) = (i[0], i[1], i[2], i[3]);
        let mut acc = dgam.get(&[a, c, b, d]).sub(dgam.get(&[b, c, a, d]));
        for e in 0..n {
            let p = gam.get(&[c, a, e]);
            if !p.is_zero() {
                let q = gam.get(&[e, b, d]);
                if !q.is_zero() {
                    acc = acc.add(&p.mul(q));
                }
            }
            let p = gam.get(&[c, b, e]);
            if !p.is_zero() {
                let q = gam.get(&[e, a, d]);
                if !q.is_zero() {
                    acc = acc.sub(&p.mul(q));
                }
            }
        }
        acc
    })
}

impl<S: Scalar> CurvaturePack<S> {
    pub fn new(ctx: S::Ctx, g: Tensor<S>) -> Result<CurvaturePack<S>, GeometryError> {
        Ok(Self::from_connection(LeviCivita::new(ctx, g)?, |s| s.clone()))
    }

    /// Builds the ladder from a given connection; `truncate` may drop
    /// Taylor orders that cannot survive into the Riemann tensor.
    pub fn from_connection(lc: LeviCivita<S>, truncate: impl Fn(&S) -> S) -> CurvaturePack<S> {
        let n = lc.dim;
        let ctx = lc.ctx.clone();
        let nf = n as f64;
        let riemann = riemann_from(&lc, truncate);
        let ricci = riemann.contract(&ctx, 0, 2).expect("valid contraction");
        let scalar = lc.trace(&ricci, 0, 1).expect("rank 2").data[0].clone();
        let j = scalar.scale(&ctx, 1.0 / (2.0 * (nf - 1.0)));
        let schouten = Tensor::from_fn(n, vec![Slot::Down, Slot::Down], 0, |i| {
            ricci.get(i).sub(&lc.g.get(i).mul(&j)).scale(&ctx, 1.0 / (nf - 2.0))
        });
        let rdown = lc.lower(&riemann, 2).expect("upper slot");
        let g = &lc.g;
        let p = &schouten;
        let weyl = Tensor::from_fn(n, vec![Slot::Down; 4], 2, |i| {
            let (a, b, c, d) = (i[0], i[1], i[2], i[3]);
            let t1 = g.get(&[c, a]).mul(p.get(&[b, d])).sub(&g.get(&[c, b]).mul(p.get(&[a, d])));
            let t2 = g.get(&[d, b]).mul(p.get(&[a, c])).sub(&g.get(&[d, a]).mul(p.get(&[b, c])));
            rdown.get(i).sub(&t1).sub(&t2)
        });
        let np = lc.nabla(&schouten);
        let cotton = Tensor::from_fn(n, vec![Slot::Down; 3], 0, |i| {
            let (a, b, c) = (i[0], i[1], i[2]);
            np.get(&[b, c, a]).sub(np.get(&[c, b, a]))
        });
        let na = lc.nabla(&cotton);
        let pup = lc.raise(&lc.raise(&schouten, 0).unwrap(), 1).unwrap();
        let bach = Tensor::from_fn(n, vec![Slot::Down; 2], -2, |i| {
            let (a, b) = (i[0], i[1]);
            let mut acc = S::constant(&ctx, 0.0);
            for e in 0..n {
                for c in 0..n {
                    let gi = lc.ginv.get(&[e, c]);
                    if !gi.is_zero() {
                        let v = na.get(&[e, a, c, b]);
                        if !v.is_zero() {
                            acc = acc.add(&gi.mul(v));
                        }
                    }
                    let pd = pup.get(&[e, c]);
                    if !pd.is_zero() {
                        let w = weyl.get(&[e, a, c, b]);
                        if !w.is_zero() {
                            acc = acc.add(&pd.mul(w));
                        }
                    }
                }
            }
            acc
        });
        CurvaturePack { lc, riemann, ricci, scalar, schouten, j, weyl, cotton, bach }
    }

    pub fn dim(&self) -> usize {
        self.lc.dim
    }

    pub fn ctx(&self) -> &S::Ctx {
        &self.lc.ctx
    }

    /// `C_ab^c_d`, the conformally invariant placement.
    pub fn weyl_mixed(&self) -> Tensor<S> {
        self.lc.raise(&self.weyl, 2).expect("lower slot")
    }

    /// Trace-free part of the Schouten tensor: zero exactly for Einstein metrics.
    pub fn einstein_residual(&self) -> Tensor<S> {
        self.lc.trace_free(&self.schouten)
    }
}

impl CurvaturePack<Jet> {
    /// Pack at one point from order-4 metric jets.
    pub fn at_point(metric: &MetricField, point: &[f64]) -> Result<CurvaturePack<Jet>, GeometryError> {
        Self::at_point_order(metric, point, METRIC_ORDER)
    }

    /// Pack from metric jets of the given order; components whose order
    /// would go negative come back empty (order 3 stops at the Cotton tensor).
    pub fn at_point_order(metric: &MetricField, point: &[f64], order: usize) -> Result<CurvaturePack<Jet>, GeometryError> {
        let g = metric.jets_at(point, order)?;
        let ctx = g.data[0].space().clone();
        let lc = LeviCivita::new(ctx, g).map_err(|_| GeometryError::SingularMetric(metric.chart.format_point(point)))?;
        Ok(Self::from_connection(lc, |j| j.truncate(2)))
    }

    /// `max(1, |C|∞, |A|∞, |P|∞)` at the point.
    pub fn scale(&self) -> f64 {
        [self.weyl.values().max_abs(), self.cotton.values().max_abs(), self.schouten.values().max_abs()]
            .into_iter()
            .fold(1.0, f64::max)
    }
}

impl CurvaturePack<f64> {
    /// `max(1, |C|∞, |A|∞, |P|∞)` at the point.
    pub fn scale(&self) -> f64 {
        [self.weyl.max_abs(), self.cotton.max_abs(), self.schouten.max_abs()].into_iter().fold(1.0, f64::max)
    }
}

impl CurvaturePack<Expr> {
    pub fn symbolic(metric: &MetricField) -> Result<CurvaturePack<Expr>, GeometryError> {
        let g = metric.tensor();
        let lc = LeviCivita::new(metric.chart.coords().clone(), g)?;
        Ok(Self::from_connection(lc, |e| e.clone()))
    }
}

/// Max-norm residual of every identity at one point, with the scale used
/// for relative comparison.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct IdentityResiduals {
    pub point: Vec<f64>,
    pub scale: f64,
    pub residuals: BTreeMap<String, f64>,
}

impl IdentityResiduals {
    pub fn worst_relative(&self) -> f64 {
        self.residuals.values().fold(0.0f64, |m, v| m.max(*v)) / self.scale
    }

    pub fn passes(&self, tol: &Tolerances) -> bool {
        self.residuals.values().all(|v| *v < tol.bound(self.scale))
    }
}

fn max_abs(it: impl Iterator<Item = f64>) -> f64 {
    it.fold(0.0, |m, v| m.max(v.abs()))
}

/// Residuals of the Cotton and Weyl Bianchi identities, the three
/// divergence identities, Weyl symmetries and trace conditions.
pub fn identity_residuals(pack: &CurvaturePack<Jet>, point: &[f64]) -> IdentityResiduals {
    let lc = &pack.lc;
    let n = pack.dim();
    let nf = n as f64;
    let g = lc.g.values();
    let ginv = lc.ginv.values();
    let c = pack.weyl.values();
    let a = pack.cotton.values();
    let p = pack.schouten.values();
    let b = pack.bach.values();
    let nc = lc.nabla(&pack.weyl).values();
    let na = lc.nabla(&pack.cotton).values();
    let np = lc.nabla(&pack.schouten).values();
    let dj: Vec<f64> = (0..n).map(|i| pack.j.partial(i).value()).collect();
    let mut r = BTreeMap::new();

    let idx3 = crate::geometry::multi_indices(n, 3).collect::<Vec<_>>();
    let idx4 = crate::geometry::multi_indices(n, 4).collect::<Vec<_>>();
    let perms3 = crate::geometry::permutations(3);

    // ∇_[a1 A_|b| a2 a3] = P_[a1^c C_a2 a3] b c
    let pmix: Vec<Vec<f64>> = (0..n).map(|x| (0..n).map(|y| (0..n).map(|z| p.get(&[x, z]) * ginv.get(&[z, y])).sum()).collect()).collect();
    let mut worst: f64 = 0.0;
    for i in &idx4 {
        let (bb, s) = (i[0], [i[1], i[2], i[3]]);
        let mut acc = 0.0;
        for (pm, sign) in &perms3 {
            let (a1, a2, a3) = (s[pm[0]], s[pm[1]], s[pm[2]]);
            let lhs = na.get(&[a1, bb, a2, a3]);
            let rhs: f64 = (0..n).map(|cc| pmix[a1][cc] * c.get(&[a2, a3, bb, cc])).sum();
            acc += *sign as f64 * (lhs - rhs);
        }
        worst = worst.max((acc / 6.0).abs());
    }
    r.insert("cotton_bianchi".into(), worst);

    // ∇_[a1 C_a2 a3] cd = g_c[a1 A_|d| a2 a3] − g_d[a1 A_|c| a2 a3]
    let mut worst: f64 = 0.0;
    for i in crate::geometry::multi_indices(n, 5) {
        let (s, cc, d) = ([i[0], i[1], i[2]], i[3], i[4]);
        let mut acc = 0.0;
        for (pm, sign) in &perms3 {
            let (a1, a2, a3) = (s[pm[0]], s[pm[1]], s[pm[2]]);
            let lhs = nc.get(&[a1, a2, a3, cc, d]);
            let rhs = g.get(&[cc, a1]) * a.get(&[d, a2, a3]) - g.get(&[d, a1]) * a.get(&[cc, a2, a3]);
            acc += *sign as f64 * (lhs - rhs);
        }
        worst = worst.max((acc / 6.0).abs());
    }
    r.insert("weyl_bianchi".into(), worst);

    // (n−3) A_abc = ∇^d C_dabc
    r.insert(
        "weyl_divergence".into(),
        max_abs(idx3.iter().map(|i| {
            let div: f64 = (0..n).flat_map(|e| (0..n).map(move |d| (e, d))).map(|(e, d)| ginv.get(&[e, d]) * nc.get(&[e, d, i[0], i[1], i[2]])).sum();
            (nf - 3.0) * a.get(i) - div
        })),
    );
    // ∇^a P_ab = ∇_b J
    r.insert(
        "schouten_divergence".into(),
        max_abs((0..n).map(|bb| {
            let div: f64 = (0..n).flat_map(|e| (0..n).map(move |d| (e, d))).map(|(e, d)| ginv.get(&[e, d]) * np.get(&[e, d, bb])).sum();
            div - dj[bb]
        })),
    );
    // ∇^a A_abc = 0
    r.insert(
        "cotton_divergence".into(),
        max_abs((0..n).flat_map(|x| (0..n).map(move |y| (x, y))).map(|(bb, cc)| {
            (0..n).flat_map(|e| (0..n).map(move |d| (e, d))).map(|(e, d)| ginv.get(&[e, d]) * na.get(&[e, d, bb, cc])).sum::<f64>()
        })),
    );
    r.insert(
        "weyl_symmetry".into(),
        max_abs(idx4.iter().flat_map(|i| {
            let (w, x, y, z) = (i[0], i[1], i[2], i[3]);
            let v = c.get(i);
            [
                v + c.get(&[x, w, y, z]),
                v + c.get(&[w, x, z, y]),
                v - c.get(&[y, z, w, x]),
                v + c.get(&[x, y, w, z]) + c.get(&[y, w, x, z]),
            ]
        })),
    );
    r.insert(
        "weyl_trace".into(),
        max_abs(crate::geometry::multi_indices(n, 2).map(|i| {
            (0..n).flat_map(|e| (0..n).map(move |d| (e, d))).map(|(e, d)| ginv.get(&[e, d]) * c.get(&[e, i[0], d, i[1]])).sum::<f64>()
        })),
    );
    r.insert(
        "cotton_trace".into(),
        max_abs((0..n).map(|x| (0..n).flat_map(|e| (0..n).map(move |d| (e, d))).map(|(e, d)| ginv.get(&[e, d]) * a.get(&[e, d, x])).sum::<f64>())),
    );
    r.insert("cotton_skew".into(), max_abs(idx3.iter().map(|i| a.get(i) + a.get(&[i[0], i[2], i[1]]))));
    r.insert("bach_symmetry".into(), max_abs(crate::geometry::multi_indices(n, 2).map(|i| b.get(&i) - b.get(&[i[1], i[0]]))));
    r.insert(
        "bach_trace".into(),
        (0..n).flat_map(|e| (0..n).map(move |d| (e, d))).map(|(e, d)| ginv.get(&[e, d]) * b.get(&[e, d])).sum::<f64>().abs(),
    );
    r.insert(
        "ricci_decomposition".into(),
        max_abs(crate::geometry::multi_indices(n, 2).map(|i| {
            pack.ricci.get(&i).value() - (nf - 2.0) * p.get(&i) - pack.j.value() * g.get(&i)
        })),
    );
    IdentityResiduals { point: point.to_vec(), scale: pack.scale(), residuals: r }
}

/// Identity residuals at each point.
pub fn identity_suite(metric: &MetricField, points: &[Vec<f64>]) -> Result<Vec<IdentityResiduals>, GeometryError> {
    use rayon::prelude::*;
    points
        .par_iter()
        .map(|p| Ok(identity_residuals(&CurvaturePack::at_point(metric, p)?, p)))
        .collect()
}

/// Same metric with `Γ^a_bc` replaced by `Γ^b_ac`, for fault injection.
pub fn transposed_connection_pack(metric: &MetricField, point: &[f64]) -> Result<CurvaturePack<Jet>, GeometryError> {
    let g = metric.jets_at(point, METRIC_ORDER)?;
    let ctx = g.data[0].space().clone();
    let lc = LeviCivita::new(ctx, g)?;
    let bad = lc.gamma.permute(&[1, 0, 2]);
    Ok(CurvaturePack::from_connection(lc.with_gamma(bad), |j| j.truncate(2)))
}

/// Residuals of the conformal transformation laws under `ĝ = e^{2Υ}g`
/// at one point: `Ĉ_ab^c_d = C_ab^c_d`, `P̂ = P − ∇Υ + ΥΥ − ½|Υ|²g` and
/// `Â_abc = A_abc + Υ^k C_kabc`.
pub fn cotton_transform_check(metric: &MetricField, upsilon: &Expr, point: &[f64]) -> Result<BTreeMap<String, f64>, GeometryError> {
    let pack = CurvaturePack::at_point(metric, point)?;
    let hat = CurvaturePack::at_point(&metric.conformal_rescale(upsilon), point)?;
    let n = metric.dim();
    let prog = crate::geometry::FieldProgram::new(&metric.chart, &metric.params, std::slice::from_ref(upsilon))?;
    let ups = prog.jets(point, METRIC_ORDER)?.remove(0);
    let du = Tensor::from_fn(n, vec![Slot::Down], 0, |i| ups.partial(i[0]));
    let ddu = pack.lc.nabla(&du).values();
    let du = du.values();
    let ginv = pack.lc.ginv.values();
    let g = pack.lc.g.values();
    let uu: f64 = (0..n).flat_map(|a| (0..n).map(move |b| (a, b))).map(|(a, b)| ginv.get(&[a, b]) * du.data[a] * du.data[b]).sum();
    let uup: Vec<f64> = (0..n).map(|a| (0..n).map(|b| ginv.get(&[a, b]) * du.data[b]).sum()).collect();

    let mut out = BTreeMap::new();
    let cm = pack.weyl_mixed().values();
    let chm = hat.weyl_mixed().values();
    out.insert("weyl".into(), chm.data.iter().zip(&cm.data).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())));
    let p = pack.schouten.values();
    let ph = hat.schouten.values();
    out.insert(
        "schouten".into(),
        max_abs(crate::geometry::multi_indices(n, 2).map(|i| {
            let (a, b) = (i[0], i[1]);
            ph.get(&i) - (p.get(&i) - ddu.get(&[a, b]) + du.data[a] * du.data[b] - 0.5 * uu * g.get(&i))
        })),
    );
    let a = pack.cotton.values();
    let ah = hat.cotton.values();
    let c = pack.weyl.values();
    out.insert(
        "cotton".into(),
        max_abs(crate::geometry::multi_indices(n, 3).map(|i| {
            let kc: f64 = (0..n).map(|k| uup[k] * c.get(&[k, i[0], i[1], i[2]])).sum();
            ah.get(&i) - a.get(&i) - kc
        })),
    );
    Ok(out)
}
