//! Built-in metrics with known answers.

use serde::Serialize;

use crate::expr::{parse, Bindings, Expr};
use crate::geometry::{Chart, GeometryError, MetricField};

/// Where an expected value comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    /// Stated for this family in the literature the fixture reproduces.
    Reference,
    /// Worked out by hand from the closed form.
    Derived,
    /// Immediate, e.g. from vanishing Weyl curvature.
    Trivial,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Fact {
    pub value: bool,
    pub provenance: Provenance,
}

const fn fact(value: bool, provenance: Provenance) -> Option<Fact> {
    Some(Fact { value, provenance })
}

/// Expected answers; `None` where the fixture makes no claim.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Expected {
    pub einstein: Option<Fact>,
    pub conformally_einstein: Option<Fact>,
    pub conformally_flat: Option<Fact>,
    pub weakly_generic: Option<Fact>,
    pub lambda2_generic: Option<Fact>,
    pub generic: Option<Fact>,
    pub cspace: Option<Fact>,
}

#[derive(Clone, Debug)]
pub struct CatalogEntry {
    pub name: String,
    pub metric: MetricField,
    /// Sampling box, one interval per coordinate.
    pub sample_box: Vec<(f64, f64)>,
    pub expected: Expected,
    /// Coframe `θ^a_μ` in which the closed-form components are quoted.
    pub coframe: Option<Vec<Vec<Expr>>>,
    /// Robinson–Trautman Weyl scalar `Ψ`.
    pub psi: Option<Expr>,
    /// `φ` with `K = dφ` solving `A + K·C = 0`.
    pub cspace_potential: Option<Expr>,
    /// A weight-1 scale `σ` with `σ⁻²g` Einstein.
    pub einstein_scale: Option<Expr>,
    /// Index of a coordinate vector annihilated by `C_abcd V^d`.
    pub weyl_kernel_coordinate: Option<usize>,
}

impl CatalogEntry {
    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    pub fn sample_points(&self, count: usize, seed: u64) -> Result<Vec<Vec<f64>>, GeometryError> {
        self.metric.sample_points(count, seed, Some(&self.sample_box))
    }
}

fn p(s: &str) -> Expr {
    parse(s).expect("catalog expression")
}

fn zeros(n: usize) -> Vec<Vec<Expr>> {
    vec![vec![Expr::zero(); n]; n]
}

fn null_coords(n: usize) -> Vec<String> {
    let mut c = vec!["u".to_string(), "r".to_string()];
    c.extend((1..=n - 2).map(|i| format!("x{i}")));
    c
}

fn signed_square_sum(names: &[String], signs: &[i32]) -> Expr {
    Expr::add_all(names.iter().zip(signs).map(|(x, &s)| Expr::int(s as i64) * Expr::symbol(x).powi(2)))
}

/// `h = −κ/2 + m/r^{n−3} + L r²/(2(n−1))` with symbols `m`, `L`.
pub fn einstein_profile(n: usize, kappa: i32) -> Expr {
    p(&format!("-({kappa})/2 + m/r^{} + L*r^2/{}", n - 3, 2 * (n - 1)))
}

/// `2du(dr + h du) + r² g_ij dx^i dx^j / (1 + κ g_kl x^k x^l / 4)²` in
/// coordinates `(u, r, x1, …)`. `h` may depend on `r` and parameters.
pub fn robinson_trautman(n: usize, kappa: i32, signs: &[i32], h: &Expr, params: Bindings) -> Result<CatalogEntry, GeometryError> {
    if n < 4 {
        return Err(GeometryError::DimensionTooSmall(n));
    }
    if signs.len() != n - 2 {
        return Err(GeometryError::Shape { expected: n - 2, found: signs.len() });
    }
    let coords = null_coords(n);
    let r = Expr::symbol("r");
    let q = Expr::one() + Expr::ratio(kappa as i64, 4) * signed_square_sum(&coords[2..], signs);
    let mut g = zeros(n);
    g[0][0] = Expr::int(2) * h.clone();
    g[0][1] = Expr::one();
    g[1][0] = Expr::one();
    for (i, &s) in signs.iter().enumerate() {
        g[i + 2][i + 2] = Expr::int(s as i64) * r.powi(2) / q.powi(2);
    }
    let singular = if kappa == 0 { vec![r.clone()] } else { vec![r.clone(), q.clone()] };
    let chart = Chart::new(coords.clone(), singular)?;
    let metric = MetricField::new(chart, params, g)?;

    let mut theta = zeros(n);
    theta[0][0] = Expr::one();
    theta[1][0] = h.clone();
    theta[1][1] = Expr::one();
    for i in 2..n {
        theta[i][i] = &r / &q;
    }

    let nn = n as i64;
    let h1 = h.diff("r");
    let h2 = h1.diff("r");
    let bracket = (Expr::int(kappa as i64) + Expr::int(2) * h.clone()) / r.powi(2) - Expr::int(2) * h1 / r.clone() + h2;
    let psi = (bracket / Expr::int((nn - 1) * (nn - 2))).simplify();
    // log|Ψ| = ½ log Ψ²
    let potential = Expr::ratio(1 - nn, nn - 3) * r.ln() + Expr::ratio(1, 2 * (3 - nn)) * psi.powi(2).ln();

    let mut box_ = vec![(0.0, 1.0), (1.5, 3.0)];
    box_.extend(std::iter::repeat_n((-0.5, 0.5), n - 2));
    Ok(CatalogEntry {
        name: format!("robinson-trautman-n{n}"),
        metric,
        sample_box: box_,
        expected: Expected {
            generic: fact(true, Provenance::Reference),
            lambda2_generic: fact(true, Provenance::Reference),
            weakly_generic: fact(true, Provenance::Reference),
            cspace: fact(true, Provenance::Reference),
            ..Expected::default()
        },
        coframe: Some(theta),
        psi: Some(psi),
        cspace_potential: Some(potential.simplify()),
        einstein_scale: None,
        weyl_kernel_coordinate: None,
    })
}

/// Robinson–Trautman with the Einstein profile: Schwarzschild–(anti-)de Sitter.
pub fn schwarzschild_de_sitter(n: usize, kappa: i32, m: f64, lambda: f64) -> Result<CatalogEntry, GeometryError> {
    let params: Bindings = [("m".to_string(), m), ("L".to_string(), lambda)].into_iter().collect();
    let mut e = robinson_trautman(n, kappa, &vec![1; n - 2], &einstein_profile(n, kappa), params)?;
    e.name = format!("schwarzschild-de-sitter-n{n}");
    e.expected.einstein = fact(true, Provenance::Reference);
    e.expected.conformally_einstein = fact(true, Provenance::Reference);
    e.einstein_scale = Some(Expr::one());
    Ok(e)
}

/// Robinson–Trautman with `h = r⁴`: a C-space that is not conformally Einstein.
pub fn rt_quartic(n: usize) -> Result<CatalogEntry, GeometryError> {
    let mut e = robinson_trautman(n, 1, &vec![1; n - 2], &p("r^4"), Bindings::new())?;
    e.name = format!("rt-quartic-n{n}");
    e.expected.einstein = fact(false, Provenance::Derived);
    e.expected.conformally_einstein = fact(false, Provenance::Reference);
    Ok(e)
}

/// `2du(dr + h du) + δ_ij dx^i dx^j` with `h(u, x)`.
pub fn pp_wave(n: usize, h: &Expr) -> Result<CatalogEntry, GeometryError> {
    if n < 4 {
        return Err(GeometryError::DimensionTooSmall(n));
    }
    let coords = null_coords(n);
    let mut g = zeros(n);
    g[0][0] = Expr::int(2) * h.clone();
    g[0][1] = Expr::one();
    g[1][0] = Expr::one();
    for i in 2..n {
        g[i][i] = Expr::one();
    }
    let laplacian = Expr::add_all(coords[2..].iter().map(|x| h.diff(x).diff(x))).simplify();
    let metric = MetricField::new(Chart::new(coords, vec![])?, Bindings::new(), g)?;
    let harmonic = laplacian.is_zero();
    Ok(CatalogEntry {
        name: format!("pp-wave-n{n}"),
        metric,
        sample_box: vec![(0.5, 1.5); n],
        expected: Expected {
            einstein: fact(harmonic, Provenance::Reference),
            weakly_generic: fact(false, Provenance::Reference),
            lambda2_generic: fact(false, Provenance::Trivial),
            generic: fact(false, Provenance::Trivial),
            ..Expected::default()
        },
        coframe: None,
        psi: None,
        cspace_potential: None,
        einstein_scale: harmonic.then(Expr::one),
        weyl_kernel_coordinate: Some(1),
    })
}

/// `ρ = 2x1 − 2(x2² + y2²)`.
pub fn hyperkahler_rho() -> Expr {
    p("2*x1 - 2*(x2^2 + y2^2)")
}

/// Real form of the Ricci-flat hyperkähler metric
/// `ρ^{-1/2}|dz1 − 2z̄2 dz2|² + 4ρ^{1/2}|dz2|²` on `ρ > 0`, coordinates
/// `(x1, y1, x2, y2)` with `z_k = x_k + i y_k`.
pub fn hyperkahler_example() -> Result<CatalogEntry, GeometryError> {
    let coords: Vec<String> = ["x1", "y1", "x2", "y2"].iter().map(|s| s.to_string()).collect();
    let rho = hyperkahler_rho();
    // a = dx1 − 2x2 dx2 − 2y2 dy2, b = dy1 + 2y2 dx2 − 2x2 dy2
    let a = [p("1"), p("0"), p("-2*x2"), p("-2*y2")];
    let b = [p("0"), p("1"), p("2*y2"), p("-2*x2")];
    let f = Expr::pow(&rho, &Expr::ratio(-1, 2));
    let k = Expr::int(4) * Expr::pow(&rho, &Expr::ratio(1, 2));
    let mut g = zeros(4);
    for i in 0..4 {
        for j in 0..4 {
            let mut v = &f * &(&(&a[i] * &a[j]) + &(&b[i] * &b[j]));
            if i == j && i >= 2 {
                v = &v + &k;
            }
            g[i][j] = v.simplify();
        }
    }
    let metric = MetricField::new(Chart::new(coords, vec![rho])?, Bindings::new(), g)?;
    Ok(CatalogEntry {
        name: "hyperkahler".into(),
        metric,
        sample_box: vec![(1.0, 2.0), (0.0, 1.0), (-0.5, 0.5), (-0.5, 0.5)],
        expected: Expected {
            einstein: fact(true, Provenance::Reference),
            conformally_einstein: fact(true, Provenance::Reference),
            weakly_generic: fact(true, Provenance::Reference),
            lambda2_generic: fact(false, Provenance::Reference),
            generic: fact(false, Provenance::Trivial),
            ..Expected::default()
        },
        coframe: None,
        psi: None,
        cspace_potential: None,
        einstein_scale: Some(Expr::one()),
        weyl_kernel_coordinate: None,
    })
}

fn conformally_flat_expected() -> Expected {
    Expected {
        einstein: fact(true, Provenance::Trivial),
        conformally_einstein: fact(true, Provenance::Trivial),
        conformally_flat: fact(true, Provenance::Trivial),
        weakly_generic: fact(false, Provenance::Trivial),
        lambda2_generic: fact(false, Provenance::Trivial),
        generic: fact(false, Provenance::Trivial),
        cspace: fact(true, Provenance::Trivial),
    }
}

/// Stereographic form `δ_ij dx^i dx^j / (1 + κ|x|²/4)²` of curvature `κ`.
pub fn constant_curvature(n: usize, kappa: i32) -> Result<CatalogEntry, GeometryError> {
    let coords: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    let q = Expr::one() + Expr::ratio(kappa as i64, 4) * signed_square_sum(&coords, &vec![1; n]);
    let mut g = zeros(n);
    for (i, row) in g.iter_mut().enumerate() {
        row[i] = q.powi(-2);
    }
    let singular = if kappa == 0 { vec![] } else { vec![q] };
    let metric = MetricField::new(Chart::new(coords, singular)?, Bindings::new(), g)?;
    Ok(CatalogEntry {
        name: format!("constant-curvature-n{n}-k{kappa}"),
        metric,
        sample_box: vec![(-0.5, 0.5); n],
        expected: conformally_flat_expected(),
        coframe: None,
        psi: None,
        cspace_potential: None,
        einstein_scale: Some(Expr::one()),
        weyl_kernel_coordinate: None,
    })
}

/// `diag(−1, …, −1, 1, …, 1)` with `negative` minus signs.
pub fn flat(n: usize, negative: usize) -> Result<CatalogEntry, GeometryError> {
    let coords: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    let mut g = zeros(n);
    for (i, row) in g.iter_mut().enumerate() {
        row[i] = Expr::int(if i < negative { -1 } else { 1 });
    }
    let metric = MetricField::new(Chart::new(coords, vec![])?, Bindings::new(), g)?;
    Ok(CatalogEntry {
        name: if negative == 0 { format!("flat-n{n}") } else { format!("flat-n{n}-q{negative}") },
        metric,
        sample_box: vec![(0.5, 1.5); n],
        expected: conformally_flat_expected(),
        coframe: None,
        psi: None,
        cspace_potential: None,
        einstein_scale: Some(Expr::one()),
        weyl_kernel_coordinate: None,
    })
}

/// Names accepted by [`by_name`].
pub const NAMES: &[&str] = &[
    "flat4",
    "sphere3",
    "sphere4",
    "hyperbolic4",
    "schwarzschild",
    "schwarzschild-de-sitter4",
    "schwarzschild-de-sitter5",
    "rt-quartic4",
    "rt-quartic5",
    "rt-quartic6",
    "pp-wave",
    "pp-wave-cubic",
    "hyperkahler",
];

pub fn by_name(name: &str) -> Option<CatalogEntry> {
    let e = match name {
        "flat4" => flat(4, 0),
        "sphere3" => constant_curvature(3, 1),
        "sphere4" => constant_curvature(4, 1),
        "hyperbolic4" => constant_curvature(4, -1),
        "schwarzschild" => schwarzschild_de_sitter(4, 1, 1.0, 0.0),
        "schwarzschild-de-sitter4" => schwarzschild_de_sitter(4, 1, 1.0, 2.0),
        "schwarzschild-de-sitter5" => schwarzschild_de_sitter(5, 1, 1.0, 2.0),
        "rt-quartic4" => rt_quartic(4),
        "rt-quartic5" => rt_quartic(5),
        "rt-quartic6" => rt_quartic(6),
        "pp-wave" => pp_wave(4, &p("x1^2 - x2^2")),
        "pp-wave-cubic" => pp_wave(4, &p("x1^3*u")),
        "hyperkahler" => hyperkahler_example(),
        _ => return None,
    };
    let mut e = e.expect("catalog fixtures are well formed");
    e.name = name.to_string();
    Some(e)
}
