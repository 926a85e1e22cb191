mod common;

use common::{points, values, wobbly, wobbly5};
use confein::catalog;
use confein::curvature::Tolerances;
use confein::expr::parse;
use confein::genericity::{
    auto_dual, classify_point, dual_candidate, weyl_down_up, GenericityError, GenericityReport, LOperator, Policy, WeylOperator,
};
use confein::geometry::multi_indices;

const P4: [f64; 4] = [0.7, 1.2, 0.9, 1.1];
const P5: [f64; 5] = [0.7, 1.2, 0.9, 1.1, 0.8];

#[test]
fn adjugate_inverts_weyl_on_two_forms() {
    for (m, p) in [(wobbly(), &P4[..]), (wobbly5(), &P5[..])] {
        let pack = values(&m, p);
        let n = pack.dim();
        let w = WeylOperator::new(&pack);
        assert!(w.det.abs() > 0.0);
        let c = weyl_down_up(&pack);
        let mut worst: f64 = 0.0;
        for i in multi_indices(n, 4) {
            let (e, f, cc, d) = (i[0], i[1], i[2], i[3]);
            let mut acc = 0.0;
            for ab in multi_indices(n, 2) {
                acc += w.tilde.get(&[e, f, ab[0], ab[1]]) * c.get(&[ab[0], ab[1], cc, d]);
            }
            let delta = |x: usize, y: usize| if x == y { 1.0 } else { 0.0 };
            let id = 0.5 * (delta(cc, e) * delta(d, f) - delta(d, e) * delta(cc, f));
            worst = worst.max((acc - w.det * id).abs());
        }
        assert!(worst < 1e-8 * w.det.abs(), "{worst}");
    }
}

#[test]
fn l_adjugate_and_symmetry() {
    let pack = values(&wobbly5(), &P5);
    let l = LOperator::new(&pack);
    let n = 5;
    for a in 0..n {
        for b in 0..n {
            let v: f64 = (0..n).map(|k| l.adjugate[a][k] * l.matrix[k][b]).sum();
            let want = if a == b { l.det } else { 0.0 };
            assert!((v - want).abs() < 1e-8 * l.det.abs());
            // L_ab = g_ac L^c_b
            let lab: f64 = (0..n).map(|c| pack.lc.g.get(&[a, c]) * l.matrix[c][b]).sum();
            let lba: f64 = (0..n).map(|c| pack.lc.g.get(&[b, c]) * l.matrix[c][a]).sum();
            assert!((lab - lba).abs() < 1e-9 * lab.abs().max(1.0));
        }
    }
}

#[test]
fn four_dimensional_l_is_pure_trace() {
    let pack = values(&wobbly(), &P4);
    let l = LOperator::new(&pack);
    let trace: f64 = (0..4).map(|a| l.matrix[a][a]).sum();
    for a in 0..4 {
        for b in 0..4 {
            let want = if a == b { trace / 4.0 } else { 0.0 };
            assert!((l.matrix[a][b] - want).abs() < 1e-9 * trace.abs());
        }
    }
    let g = classify_point(&pack, &P4, &Tolerances::default());
    assert!(g.four_identity.unwrap() < 1e-9 * trace.abs().max(1.0));
}

#[test]
fn weyl_determinant_rescales_with_exponent() {
    for (m, p) in [(wobbly(), &P4[..]), (wobbly5(), &P5[..])] {
        let n = m.dim() as f64;
        let ups = parse("x*y/3 + z^2/5").unwrap();
        let u = ups.eval(&common::bindings(&m, p)).unwrap();
        let d0 = WeylOperator::new(&values(&m, p)).det;
        let d1 = WeylOperator::new(&values(&m.conformal_rescale(&ups), p)).det;
        let exponent = (d1 / d0).ln() / u;
        assert!((exponent + n * (n - 1.0)).abs() < 1e-6, "{exponent}");
    }
}

#[test]
fn dual_candidates_are_invariant() {
    let tol = Tolerances::default();
    for (m, p) in [(wobbly(), &P4[..]), (wobbly5(), &P5[..])] {
        let pack = values(&m, p);
        let hat = values(&m.conformal_rescale(&parse("x*y/3 + z^2/5").unwrap()), p);
        let policies: &[Policy] = if m.dim() == 4 { &[Policy::FromL, Policy::FromC, Policy::Dim4C3] } else { &[Policy::FromL, Policy::FromC] };
        for &policy in policies {
            let d = dual_candidate(&pack, policy, &tol, "p").unwrap();
            assert!(d.defect(&pack) < 1e-7, "{policy}");
            let dh = dual_candidate(&hat, policy, &tol, "p").unwrap();
            let (c0, c1) = (d.canonical(&pack), dh.canonical(&hat));
            assert!(c1.sub(&c0).max_abs() < 1e-7 * c0.max_abs(), "{policy}: canonical placement not invariant");
        }
    }
}

#[test]
fn k_is_minus_gradient_of_factor_on_rescaled_einstein() {
    let tol = Tolerances::default();
    let e = catalog::by_name("schwarzschild").unwrap();
    let ups = parse("log(r) + 3*x1/10").unwrap();
    let m = e.metric.conformal_rescale(&ups);
    for p in points(&e, 3, 6) {
        let pack = values(&m, &p);
        let b = common::bindings(&m, &p);
        for policy in [Policy::FromL, Policy::FromC, Policy::Dim4C3] {
            let k = dual_candidate(&pack, policy, &tol, "p").unwrap().k_field(&pack);
            for (a, c) in m.chart.coords().iter().enumerate() {
                let want = -ups.diff(c).eval(&b).unwrap();
                assert!((k.get(&[a]) - want).abs() < 1e-7 * (1.0 + want.abs()), "{policy} K_{a}");
            }
        }
    }
}

#[test]
fn degenerate_weyl_blocks_every_policy() {
    let tol = Tolerances::default();
    for name in ["sphere4", "flat4", "pp-wave", "pp-wave-cubic"] {
        let e = catalog::by_name(name).unwrap();
        let p = &points(&e, 1, 0)[0];
        let pack = values(&e.metric, p);
        for policy in [Policy::FromL, Policy::FromC, Policy::Dim4C3] {
            let err = dual_candidate(&pack, policy, &tol, "p").unwrap_err();
            assert!(matches!(err, GenericityError::Precondition { .. }), "{name} {policy}: {err}");
        }
        assert!(auto_dual(&pack, &tol, "p").is_err());
    }
    let e = catalog::rt_quartic(5).unwrap();
    let pack = values(&e.metric, &points(&e, 1, 0)[0]);
    assert_eq!(dual_candidate(&pack, Policy::Dim4C3, &tol, "p").unwrap_err(), GenericityError::Dimension(5));
}

#[test]
fn implication_chain_holds_across_catalog() {
    let tol = Tolerances::default();
    for name in catalog::NAMES {
        let e = catalog::by_name(name).unwrap();
        let pts: Vec<_> = points(&e, 3, 5)
            .into_iter()
            .map(|p| classify_point(&values(&e.metric, &p), &p, &tol))
            .collect();
        assert!(pts.iter().all(|g| g.consistent()), "{name}");
        let report = GenericityReport::from_points(pts);
        let exp = e.expected;
        for (flag, agg) in [
            (exp.weakly_generic, report.weakly_generic),
            (exp.lambda2_generic, report.lambda2_generic),
            (exp.generic, report.generic),
        ] {
            if let Some(f) = flag {
                let want = if f.value { confein::genericity::Agreement::All } else { confein::genericity::Agreement::None };
                assert_eq!(agg, want, "{name}");
            }
        }
    }
}

#[test]
fn rt_four_has_a_nonzero_cubic_scalar() {
    let e = catalog::rt_quartic(4).unwrap();
    for p in points(&e, 4, 8) {
        let pack = values(&e.metric, &p);
        let g = classify_point(&pack, &p, &Tolerances::default());
        let (c3, s3) = (g.c3.unwrap(), g.star_c3.unwrap());
        assert!(c3.abs().max(s3.abs()) > 1e-6, "{c3} {s3}");
    }
}

#[test]
fn rt_dual_system_alone_is_degenerate() {
    // the ε-dual system by itself has solutions; only jointly with the
    // symmetric one is the kernel trivial
    for n in [4, 5] {
        let e = catalog::rt_quartic(n).unwrap();
        let p = &points(&e, 1, 2)[0];
        let g = classify_point(&values(&e.metric, p), p, &Tolerances::default());
        assert!(g.dual_kernel_dim > 0);
        assert_eq!((g.symmetric_kernel_dim, g.joint_kernel_dim), (0, 0));
        assert!(g.generic);
    }
}
