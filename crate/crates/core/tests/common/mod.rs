#![allow(dead_code)]

use confein::catalog::CatalogEntry;
use confein::curvature::CurvaturePack;
use confein::expr::{parse, Bindings};
use confein::genericity::pack_values;
use confein::geometry::{Chart, MetricField};
use confein::jet::Jet;

pub fn metric(coords: &[&str], rows: &[&[&str]], params: &[(&str, f64)]) -> MetricField {
    let chart = Chart::new(coords.iter().map(|s| s.to_string()).collect(), vec![]).unwrap();
    let g = rows.iter().map(|r| r.iter().map(|s| parse(s).unwrap()).collect()).collect();
    let b: Bindings = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    MetricField::new(chart, b, g).unwrap()
}

/// A Riemannian 4-metric with no special structure.
pub fn wobbly() -> MetricField {
    metric(
        &["x", "y", "z", "w"],
        &[
            &["1 + x*y^2", "z/5", "0", "0"],
            &["z/5", "exp(x*w/3)", "0", "x/7"],
            &["0", "0", "2 + sin(y*z)", "0"],
            &["0", "x/7", "0", "1 + w^2*z"],
        ],
        &[],
    )
}

/// A Riemannian 5-metric with no special structure.
pub fn wobbly5() -> MetricField {
    metric(
        &["x", "y", "z", "w", "v"],
        &[
            &["1 + x*y^2", "z/5", "0", "0", "v/9"],
            &["z/5", "exp(x*w/3)", "0", "x/7", "0"],
            &["0", "0", "2 + sin(y*z)", "0", "y*v/11"],
            &["0", "x/7", "0", "1 + w^2*z", "0"],
            &["v/9", "0", "y*v/11", "0", "3 + x*v/4"],
        ],
        &[],
    )
}

pub fn bindings(m: &MetricField, point: &[f64]) -> Bindings {
    let mut b = m.params.clone();
    for (name, v) in m.chart.coords().iter().zip(point) {
        b.insert(name.clone(), *v);
    }
    b
}

pub fn jets(m: &MetricField, p: &[f64]) -> CurvaturePack<Jet> {
    CurvaturePack::<Jet>::at_point(m, p).unwrap()
}

pub fn values(m: &MetricField, p: &[f64]) -> CurvaturePack<f64> {
    pack_values(&jets(m, p))
}

pub fn points(e: &CatalogEntry, count: usize, seed: u64) -> Vec<Vec<f64>> {
    e.sample_points(count, seed).unwrap()
}
