mod common;

use common::{bindings, jets, points};
use confein::catalog;
use confein::curvature::Tolerances;
use confein::expr::parse;
use confein::genericity::{dual_candidate, pack_values, Policy};
use confein::geometry::Slot;
use confein::jet::Jet;
use confein::obstructions::{conformal_einstein_tensor_verdict, PipelineOptions, Verdict};
use confein::tractor::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_tractor(space: &std::sync::Arc<confein::jet::JetSpace>, n: usize, rng: &mut ChaCha8Rng) -> TractorTensor<Jet> {
    let len = space.len(2);
    TractorTensor::from_fn(n, vec![], 1, 0, |_| Jet::from_coeffs(space, 2, (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()))
}

#[test]
fn x_differentiates_to_z() {
    let e = catalog::by_name("flat4").unwrap();
    let pack = jets(&e.metric, &points(&e, 1, 0)[0]);
    let x = TractorTensor::from_fn(4, vec![], 1, 0, |i| Jet::constant(pack.ctx(), if i[0] == 5 { 1.0 } else { 0.0 }));
    let d = tractor_connection(&pack, &x).values();
    for a in 0..4 {
        for p in 0..6 {
            let want = if (1..=4).contains(&p) && p - 1 == a { 1.0 } else { 0.0 };
            assert_eq!(*d.get(&[a, p]), want);
        }
    }
}

#[test]
fn connection_preserves_the_tractor_metric() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for name in catalog::NAMES {
        let e = catalog::by_name(name).unwrap();
        let p = &points(&e, 1, 1)[0];
        let pack = jets(&e.metric, p);
        let hi = tractor_metric_inverse(&pack);
        let dh = tractor_connection(&pack, &hi).values().max_abs();
        assert!(dh < 1e-10 * pack.scale(), "{name}: {dh}");
        let n = e.dim();
        let h = tractor_metric(&pack);
        let (t1, t2) = (random_tractor(pack.ctx(), n, &mut rng), random_tractor(pack.ctx(), n, &mut rng));
        let ip = pair(pack.ctx(), &h, &t1.data, &t2.data);
        let (d1, d2) = (tractor_connection(&pack, &t1), tractor_connection(&pack, &t2));
        for a in 0..n {
            let row = |d: &TractorTensor<Jet>| (0..n + 2).map(|q| d.get(&[a, q]).clone()).collect::<Vec<_>>();
            let rhs = pair(pack.ctx(), &h, &row(&d1), &t2.data).add(&pair(pack.ctx(), &h, &t1.data, &row(&d2)));
            let diff = (ip.partial(a).value() - rhs.value()).abs();
            assert!(diff < 1e-9 * (1.0 + rhs.value().abs()), "{name}: {diff}");
        }
    }
}

#[test]
fn change_of_scale_is_consistent() {
    let e = catalog::rt_quartic(4).unwrap();
    let p = &points(&e, 1, 2)[0];
    let vals = pack_values(&jets(&e.metric, p));
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let v = TractorTensor::from_fn(4, vec![], 1, 0, |_| rng.random_range(-1.0..1.0));
    let w = TractorTensor::from_fn(4, vec![], 1, 0, |_| rng.random_range(-1.0..1.0));
    let h = tractor_metric(&vals);
    let ue = parse("log(r)").unwrap();
    let u = ue.eval(&bindings(&e.metric, p)).unwrap();
    let du: Vec<f64> = e.metric.chart.coords().iter().map(|c| ue.diff(c).eval(&bindings(&e.metric, p)).unwrap()).collect();
    let hat = pack_values(&jets(&e.metric.conformal_rescale(&ue), p));
    let (vh, wh) = (change_scale(&(), &v, &vals.lc.ginv, &u, &du), change_scale(&(), &w, &vals.lc.ginv, &u, &du));
    let hh = tractor_metric(&hat);
    let before = pair(&(), &h, &v.data, &w.data);
    assert!((pair(&(), &hh, &vh.data, &wh.data) - before).abs() < 1e-10 * before.abs().max(1.0));
    // α is a density: only its trivialisation changes
    assert!((vh.data[0] - u.exp() * v.data[0]).abs() < 1e-12);
    let minus: Vec<f64> = du.iter().map(|x| -x).collect();
    let back = change_scale(&(), &vh, &hat.lc.ginv, &-u, &minus);
    assert!(back.sub(&v).max_abs() < 1e-10);
    // Υ₁ then Υ₂ against Υ₁ + Υ₂
    let (u2, du2) = (0.3, vec![0.1, -0.2, 0.05, 0.4]);
    let two = change_scale(&(), &vh, &hat.lc.ginv, &u2, &du2);
    let sum: Vec<f64> = du.iter().zip(&du2).map(|(a, b)| a + b).collect();
    let once = change_scale(&(), &v, &vals.lc.ginv, &(u + u2), &sum);
    assert!(two.sub(&once).max_abs() < 1e-10);
}

#[test]
fn connection_commutes_with_change_of_scale() {
    let e = catalog::rt_quartic(5).unwrap();
    let ue = parse("log(r) + x1*u/5").unwrap();
    let hat_metric = e.metric.conformal_rescale(&ue);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for p in points(&e, 2, 3) {
        let pack = jets(&e.metric, &p);
        let hat = jets(&hat_metric, &p);
        let u = scalar_jet(&e.metric, &ue, &p, 3).unwrap();
        let du: Vec<Jet> = (0..5).map(|a| u.partial(a)).collect();
        let v = random_tractor(pack.ctx(), 5, &mut rng);
        let lhs = tractor_connection(&hat, &change_scale(pack.ctx(), &v, &pack.lc.ginv, &u, &du)).values();
        let rhs = change_scale(pack.ctx(), &tractor_connection(&pack, &v), &pack.lc.ginv, &u, &du).values();
        assert!(lhs.sub(&rhs).max_abs() < 1e-8 * pack.scale() * rhs.max_abs().max(1.0));
    }
}

#[test]
fn omega_is_conformally_invariant() {
    let e = catalog::rt_quartic(4).unwrap();
    let ue = parse("log(r) + x1*u/5").unwrap();
    let hat_metric = e.metric.conformal_rescale(&ue);
    for p in points(&e, 2, 4) {
        let vals = pack_values(&jets(&e.metric, &p));
        let b = bindings(&e.metric, &p);
        let u = ue.eval(&b).unwrap();
        let du: Vec<f64> = e.metric.chart.coords().iter().map(|c| ue.diff(c).eval(&b).unwrap()).collect();
        let moved = change_scale(&(), &omega(&vals), &vals.lc.ginv, &u, &du);
        let direct = omega(&pack_values(&jets(&hat_metric, &p)));
        assert!(moved.sub(&direct).max_abs() < 1e-7 * vals.scale());
        let r = div_transform_check(&e.metric, &ue, &p).unwrap();
        assert!(r < 1e-7, "divergence transformation: {r}");
    }
}

#[test]
fn d_operator_and_einstein_tractor() {
    for name in ["schwarzschild-de-sitter4", "schwarzschild-de-sitter5", "sphere4", "hyperbolic4"] {
        let e = catalog::by_name(name).unwrap();
        let n = e.dim() as f64;
        for p in points(&e, 2, 5) {
            let pack = jets(&e.metric, &p);
            let i = einstein_tractor(&pack, &Jet::constant(pack.ctx(), 1.0)).values();
            let j = pack.j.value();
            assert!((i.data[0] - 1.0).abs() < 1e-12);
            assert!(i.data[1..=e.dim()].iter().all(|v| *v == 0.0));
            assert!((i.data[e.dim() + 1] + j / n).abs() < 1e-9 * j.abs().max(1.0), "{name}");
        }
    }
}

#[test]
fn parallel_tractor_detects_einstein_scales() {
    let tol = Tolerances::default();
    for name in ["schwarzschild", "schwarzschild-de-sitter4", "schwarzschild-de-sitter5", "sphere4", "hyperbolic4"] {
        let e = catalog::by_name(name).unwrap();
        let r = parallel_tractor_check(&e.metric, &parse("1").unwrap(), &points(&e, 3, 6), &tol).unwrap();
        assert!(r.einstein_scale, "{name}");
        for p in &r.points {
            assert!(p.residual < 1e-9 * p.norm, "{name}: {}", p.residual);
            assert!((p.h_ii - p.h_ii_einstein).abs() < 1e-8 * p.h_ii_einstein.abs().max(1.0));
            assert!(p.rescaled_tf_schouten < 1e-9);
        }
    }
    let e = catalog::rt_quartic(4).unwrap();
    let r = parallel_tractor_check(&e.metric, &parse("1").unwrap(), &points(&e, 3, 6), &tol).unwrap();
    assert!(!r.einstein_scale);
    assert!(r.points.iter().all(|p| p.residual > 1e-3 * p.norm));

    let e = catalog::by_name("flat4").unwrap();
    let sigma = parse("1 + (x1^2 + x2^2 + x3^2 + x4^2)/4").unwrap();
    let r = parallel_tractor_check(&e.metric, &sigma, &points(&e, 3, 6), &tol).unwrap();
    assert!(r.einstein_scale);
    assert!(r.points.iter().all(|p| p.residual < 1e-8 && p.rescaled_tf_schouten < 1e-9));

    let err = parallel_tractor_check(&e.metric, &parse("x1 - x1").unwrap(), &points(&e, 1, 6), &tol).unwrap_err();
    assert!(matches!(err, TractorError::SigmaVanishes(_)));
}

#[test]
fn tractor_curvature_is_the_connection_commutator() {
    let e = catalog::rt_quartic(5).unwrap();
    let p = &points(&e, 1, 7)[0];
    let pack = jets(&e.metric, p);
    let vals = pack_values(&pack);
    let om = omega(&vals);
    let h = tractor_metric(&vals);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..5 {
        let v = random_tractor(pack.ctx(), 5, &mut rng);
        let dd = tractor_connection(&pack, &tractor_connection(&pack, &v)).values();
        let ov = contract_last(&(), &h, &om, &v.values().data);
        let mut worst = 0.0f64;
        for a in 0..5 {
            for b in 0..5 {
                for c in 0..7 {
                    let comm = dd.get(&[a, b, c]) - dd.get(&[b, a, c]);
                    worst = worst.max((comm - ov.get(&[a, b, c])).abs());
                }
            }
        }
        assert!(worst < 1e-7 * vals.scale(), "{worst}");
    }
}

#[test]
fn divergence_two_ways_and_w() {
    for (m, p) in [(common::wobbly(), vec![0.7, 1.2, 0.9, 1.1]), (common::wobbly5(), vec![0.7, 1.2, 0.9, 1.1, 0.8])] {
        let pack = jets(&m, &p);
        let a = div_omega(&pack).values();
        let b = div_omega_closed(&pack_values(&pack));
        let s = pack.scale();
        assert!(a.sub(&b).max_abs() < 1e-7 * s, "{}", a.sub(&b).max_abs());
        if m.dim() == 4 {
            // only the Bach tensor survives
            assert!((a.max_abs() - pack.bach.values().max_abs()).abs() < 1e-7 * s);
            let vals = pack_values(&pack);
            let w = w_tensor(&vals, &omega(&vals), &b);
            let n = 4;
            for i in indices(&w.shape()) {
                if (1..=n).contains(&i[0]) && (1..=n).contains(&i[1]) {
                    assert_eq!(*w.get(&i), 0.0);
                }
            }
        }
    }
    let e = catalog::by_name("flat4").unwrap();
    let pack = jets(&e.metric, &points(&e, 1, 0)[0]);
    assert_eq!(omega(&pack).values().max_abs(), 0.0);
    let vals = pack_values(&pack);
    assert_eq!(w_tensor(&vals, &omega(&vals), &div_omega_closed(&vals)).max_abs(), 0.0);
    assert_eq!(omega(&pack).tensor_slots, vec![Slot::Down, Slot::Down]);
}

#[test]
fn annihilation_on_einstein_and_cspace_metrics() {
    for name in ["schwarzschild-de-sitter4", "schwarzschild-de-sitter5"] {
        let e = catalog::by_name(name).unwrap();
        for p in points(&e, 2, 8) {
            let pack = jets(&e.metric, &p);
            let i = einstein_tractor(&pack, &Jet::constant(pack.ctx(), 1.0)).values();
            let r = annihilation_check(&pack, &i.data);
            for v in [r.omega, r.nabla_omega, r.div_omega, r.w] {
                assert!(v < 1e-8 * r.scale, "{name}: {r:?}");
            }
        }
    }
    let tol = Tolerances::default();
    let e = catalog::rt_quartic(5).unwrap();
    for p in points(&e, 2, 8) {
        let pack = jets(&e.metric, &p);
        let vals = pack_values(&pack);
        let k = dual_candidate(&vals, Policy::FromL, &tol, "p").unwrap().k_field(&vals);
        let mut i = vec![1.0];
        i.extend(k.data.iter().map(|v| -v));
        i.push(0.0);
        let r = annihilation_check(&pack, &i);
        assert!(r.omega < 1e-8 * r.scale, "{r:?}");
        assert!(r.div_omega > 1e-3 * r.scale, "{r:?}");
        assert!(r.cspace_consistency < 1e-10 * r.scale);
        let x: Vec<f64> = (0..7).map(|k| if k == 6 { 1.0 } else { 0.0 }).collect();
        let rx = annihilation_check(&pack, &x);
        assert_eq!((rx.sigma, rx.omega), (0.0, 0.0));
        assert!(rx.nabla_omega > 0.0);
    }
}

#[test]
fn rank_obstruction_cases() {
    let tol = Tolerances::default();
    for name in ["schwarzschild-de-sitter4", "schwarzschild-de-sitter5"] {
        let e = catalog::by_name(name).unwrap();
        let n = e.dim();
        let pts = points(&e, 3, 9);
        let r = rank_obstruction(&e.metric, &pts, &tol).unwrap();
        assert_eq!(r.verdict, Verdict::ConformallyEinstein, "{name}: {}", r.reason);
        for (rp, p) in r.points.iter().zip(&pts) {
            assert!(rp.rank <= n + 1);
            let pack = jets(&e.metric, p);
            let i = einstein_tractor(&pack, &Jet::constant(pack.ctx(), 1.0)).values().data;
            let k = rp.kernel.as_ref().unwrap();
            let dot: f64 = k.iter().zip(&i).map(|(a, b)| a * b).sum();
            let norm = i.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(dot.abs() / norm > 1.0 - 1e-6, "{name}: cosine {}", dot.abs() / norm);
        }
    }
    let e = catalog::rt_quartic(5).unwrap();
    let r = rank_obstruction(&e.metric, &points(&e, 3, 9), &tol).unwrap();
    assert_eq!(r.verdict, Verdict::NotConformallyEinstein);
    assert!(r.points.iter().all(|p| p.rank == 7));
    let e = catalog::by_name("flat4").unwrap();
    let r = rank_obstruction(&e.metric, &points(&e, 2, 9), &tol).unwrap();
    assert_eq!((r.verdict, r.reason.as_str()), (Verdict::Inconclusive, "not weakly generic"));
    assert!(r.points.iter().all(|p| p.rank == 0));
}

#[test]
fn rank_and_tensor_verdicts_agree_on_catalog() {
    let tol = Tolerances::default();
    let opts = PipelineOptions { potential: false, ..Default::default() };
    for name in catalog::NAMES {
        let e = catalog::by_name(name).unwrap();
        let pts = points(&e, 3, 10);
        let rank = rank_obstruction(&e.metric, &pts, &tol).unwrap();
        let tensor = conformal_einstein_tensor_verdict(&e.metric, &pts, &opts).unwrap();
        if rank.verdict != Verdict::Inconclusive && tensor.verdict != Verdict::Inconclusive {
            assert_eq!(rank.verdict, tensor.verdict, "{name}");
        }
        if let Some(exp) = e.expected.conformally_einstein {
            for v in [rank.verdict, tensor.verdict] {
                match v {
                    Verdict::ConformallyEinstein => assert!(exp.value, "{name}"),
                    Verdict::NotConformallyEinstein => assert!(!exp.value, "{name}"),
                    Verdict::Inconclusive => {}
                }
            }
        }
    }
}
