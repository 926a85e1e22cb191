//! Command drivers. Each returns the exit code, a human summary and the JSON
//! report; `main` only handles arguments and I/O.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use confein::catalog;
use confein::curvature::{identity_suite, CurvaturePack, IdentityResiduals, Tolerances};
use confein::expr::{parse, Bindings, Expr};
use confein::genericity::{auto_dual, dual_candidate, pack_values, DualCandidate, GenericityError, Policy, WeylOperator};
use confein::geometry::{GeometryError, MetricField, Tensor};
use confein::jet::Jet;
use confein::obstructions::{
    bach_residual, conformal_einstein_tensor_verdict, cspace_residual, dim4_invariant, e_tensor, evaluate_point, f1, f2, fit_exponent,
    g_tensor, gbar_tensor, ObstructionError, PipelineOptions, Residual, Theorem, Verdict,
};
use confein::tractor::{parallel_tractor_check, rank_obstruction, RankReport, TractorError};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::mspec::{MetricSpec, SpecError};
use crate::report::*;

pub const INVARIANTS: &[&str] = &["F1", "F2", "E", "G", "Gbar", "dim4", "cspace", "bach"];

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Obstruction(#[from] ObstructionError),
    #[error(transparent)]
    Tractor(#[from] TractorError),
    #[error(transparent)]
    Genericity(#[from] GenericityError),
    #[error("unknown invariant `{0}`; expected one of F1, F2, E, G, Gbar, dim4, cspace, bach")]
    UnknownInvariant(String),
    #[error("unknown catalog entry `{0}`")]
    UnknownEntry(String),
    #[error("{0}")]
    Usage(String),
}

/// Operator-controlled numerics shared by all commands.
#[derive(Clone, Debug)]
pub struct Options {
    pub tol: Tolerances,
    pub points: usize,
    pub seed: u64,
    pub policy: Option<Policy>,
}

impl Default for Options {
    fn default() -> Self {
        Options { tol: Tolerances::default(), points: 10, seed: 0, policy: None }
    }
}

impl Options {
    pub fn validate(&self) -> Result<(), CliError> {
        let t = &self.tol;
        if !(t.tol_rel > 0.0) {
            return Err(CliError::Usage(format!("--tol-rel must be positive, got {}", t.tol_rel)));
        }
        if !(t.tol_abs >= 0.0) || !(t.rank_tol > 0.0) {
            return Err(CliError::Usage("--tol-abs must be non-negative and --rank-tol positive".into()));
        }
        if self.points == 0 {
            return Err(CliError::Usage("--points must be at least 1".into()));
        }
        Ok(())
    }

    fn settings(&self) -> Settings {
        Settings {
            tolerances: self.tol,
            points: self.points,
            seed: self.seed,
            policy: self.policy.map_or_else(|| "auto".to_string(), |p| p.to_string()),
        }
    }
}

pub fn parse_policy(s: &str) -> Result<Option<Policy>, String> {
    if s == "auto" {
        Ok(None)
    } else {
        s.parse().map(Some)
    }
}

/// A parsed metric file together with the bytes it came from.
pub struct Input {
    pub spec: MetricSpec,
    pub info: InputInfo,
}

impl Input {
    pub fn from_text(text: &str) -> Result<Input, CliError> {
        let spec = MetricSpec::parse(text)?;
        let info = InputInfo::new(spec.name.clone(), spec.coords.clone(), text.as_bytes());
        Ok(Input { spec, info })
    }

    pub fn from_path(path: &Path) -> Result<Input, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
        Input::from_text(&text)
    }

    pub fn from_spec(spec: MetricSpec) -> Input {
        let text = spec.write();
        let info = InputInfo::new(spec.name.clone(), spec.coords.clone(), text.as_bytes());
        Input { spec, info }
    }

    fn prepare(&self, opts: &Options) -> Result<(MetricField, Vec<Vec<f64>>), CliError> {
        opts.validate()?;
        let metric = self.spec.metric()?;
        let points = self.spec.sample_points(&metric, opts.points, opts.seed)?;
        Ok((metric, points))
    }
}

pub struct Outcome {
    pub code: i32,
    pub summary: String,
    pub json: String,
}

fn bindings(metric: &MetricField, p: &[f64]) -> Bindings {
    let mut b = metric.params.clone();
    for (c, v) in metric.chart.coords().iter().zip(p) {
        b.insert(c.clone(), *v);
    }
    b
}

fn fmt_point(p: &[f64]) -> String {
    format!("({})", p.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join(", "))
}

// ---------------------------------------------------------------- classify

pub fn classify(input: &Input, opts: &Options) -> Result<Outcome, CliError> {
    let (metric, points) = input.prepare(opts)?;
    let settings = opts.settings();
    let pipeline = PipelineOptions { policy: opts.policy, tol: opts.tol, potential: true };
    let tensor = match conformal_einstein_tensor_verdict(&metric, &points, &pipeline) {
        Ok(r) => r,
        Err(ObstructionError::Inconsistent(msg)) => {
            #[derive(Serialize)]
            struct Conflict<'a> {
                verdict: Verdict,
                reason: &'a str,
            }
            let body = Conflict { verdict: Verdict::Inconclusive, reason: &msg };
            let json = to_json(&Envelope::new("classify", &input.info, &settings, body));
            return Ok(Outcome { code: 2, summary: format!("verdict: inconclusive\nreason: {msg}\n"), json });
        }
        Err(e) => return Err(e.into()),
    };
    let rank: Option<RankReport> = if metric.dim() > 3 { Some(rank_obstruction(&metric, &points, &opts.tol)?) } else { None };

    let mut theorems: Vec<TheoremOut> = tensor.theorems.iter().map(TheoremOut::from).collect();
    if let Some(r) = &rank {
        theorems.push(TheoremOut {
            id: Theorem::TractorRank,
            precondition: Theorem::TractorRank.precondition(),
            verdict: r.verdict,
            applicable_points: r.points.iter().filter(|p| p.weakly_generic).count(),
            worst_relative: None,
            reason: Some(r.reason.clone()),
        });
    }
    let rank_verdict = rank.as_ref().map_or(Verdict::Inconclusive, |r| r.verdict);
    let (verdict, decided_by, reason) = match (tensor.verdict, rank_verdict) {
        (t, r) if t != Verdict::Inconclusive && r != Verdict::Inconclusive && t != r => (
            Verdict::Inconclusive,
            None,
            format!("tensor test {} and tractor-rank disagree", tensor.decided_by.map_or("?", Theorem::id)),
        ),
        (Verdict::Inconclusive, r) if r != Verdict::Inconclusive => {
            (r, Some(Theorem::TractorRank), format!("decided by tractor-rank: {}", rank.as_ref().unwrap().reason))
        }
        _ => (tensor.verdict, tensor.decided_by, tensor.reason.clone()),
    };
    let cited: Vec<Theorem> =
        if verdict == Verdict::Inconclusive { Vec::new() } else { theorems.iter().filter(|t| t.verdict == verdict).map(|t| t.id).collect() };

    let pts: Vec<PointOut> = tensor
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| PointOut {
            point: p.point.clone(),
            scale: p.scale,
            genericity: p.genericity.clone(),
            policy: p.policy,
            k: p.k.clone(),
            applicable: p.applicable.clone(),
            residuals: p.residuals.iter().map(|(k, v)| (k.clone(), ResidualOut::from(v))).collect(),
            tractor: rank.as_ref().map(|r| {
                let rp = &r.points[i];
                RankOut { rank: rp.rank, weakly_generic: rp.weakly_generic, singular_values: rp.singular_values.clone(), kernel: rp.kernel.clone() }
            }),
        })
        .collect();
    let potential = tensor.potential.as_ref().map(|p| match p {
        Ok(p) => PotentialOut { closedness: Some(p.closedness), values: Some(p.values.clone()), error: None },
        Err(e) => PotentialOut { closedness: None, values: None, error: Some(e.clone()) },
    });
    let body = ClassifyBody {
        residual_table: residual_table(tensor.points.iter().map(|p| &p.residuals)),
        points: pts,
        theorems,
        verdict,
        decided_by,
        cited,
        reason,
        notes: tensor.notes.clone(),
        potential,
    };

    let mut s = String::new();
    let _ = writeln!(s, "verdict: {}", body.verdict);
    let _ = writeln!(s, "reason: {}", body.reason);
    if !body.cited.is_empty() {
        let _ = writeln!(s, "cited: {}", body.cited.iter().map(|t| t.id()).collect::<Vec<_>>().join(", "));
    }
    for n in &body.notes {
        let _ = writeln!(s, "note: {n}");
    }
    let _ = writeln!(s, "{:<20} {:<26}", "theorem", "verdict");
    for t in &body.theorems {
        let _ = writeln!(s, "{:<20} {:<26} ({} points)", t.id.id(), t.verdict.to_string(), t.applicable_points);
    }
    let _ = writeln!(s, "{:<20} {:>12}", "residual", "max rel");
    for (k, r) in &body.residual_table {
        let _ = writeln!(s, "{k:<20} {:>12.3e}", r.max_relative);
    }
    let json = to_json(&Envelope::new("classify", &input.info, &settings, &body));
    Ok(Outcome { code: exit_code(body.verdict), summary: s, json })
}

// -------------------------------------------------------------- invariants

pub fn parse_which(list: &str) -> Result<Vec<String>, CliError> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| INVARIANTS.iter().find(|k| **k == s).map(|k| k.to_string()).ok_or_else(|| CliError::UnknownInvariant(s.to_string())))
        .collect()
}

fn dual(pack: &CurvaturePack<Jet>, policy: Option<Policy>, tol: &Tolerances) -> Result<DualCandidate<Jet>, GenericityError> {
    match policy {
        Some(p) => dual_candidate(pack, p, tol, ""),
        None => auto_dual(pack, tol, ""),
    }
}

/// Component values of one named invariant; `None` when its precondition fails.
pub fn invariant_tensor(pack: &CurvaturePack<Jet>, name: &str, policy: Option<Policy>, tol: &Tolerances) -> Option<Tensor<f64>> {
    let vals = pack_values(pack);
    let k = || dual(pack, policy, tol).ok().map(|d| d.k_field(pack).values());
    match name {
        "E" => dual(pack, policy, tol).ok().map(|d| e_tensor(pack, &d).e.values()),
        "G" => g_tensor(pack).ok().map(|t| t.values()),
        "Gbar" => gbar_tensor(pack).ok().map(|t| t.values()),
        "dim4" => dim4_invariant(pack).ok().map(|t| t.values()),
        "F1" => f1(&vals, &WeylOperator::new(&vals)).ok(),
        "F2" => f2(&vals, &WeylOperator::new(&vals)).ok(),
        "cspace" => k().map(|k| cspace_residual(&vals, &k)),
        "bach" => k().map(|k| bach_residual(&vals, &k)),
        _ => None,
    }
}

#[derive(Serialize)]
struct PotentialCheck {
    /// `max_a |K_a − ∂_a φ| / (1 + |∂_a φ|)` over the points.
    max_deviation: f64,
    agree: bool,
}

#[derive(Serialize)]
struct Exponent {
    mean: f64,
    spread: f64,
}

#[derive(Serialize)]
struct Covariance {
    upsilon: String,
    exponents: BTreeMap<String, Option<Exponent>>,
}

#[derive(Serialize)]
struct InvariantPoint {
    point: Vec<f64>,
    policy: Option<Policy>,
    residuals: BTreeMap<String, Option<ResidualOut>>,
}

#[derive(Serialize)]
struct InvariantsBody {
    which: Vec<String>,
    points: Vec<InvariantPoint>,
    residual_table: BTreeMap<String, TableRow>,
    k_provenance: Option<PotentialCheck>,
    covariance: Option<Covariance>,
}

pub fn invariants(input: &Input, opts: &Options, which: &[String]) -> Result<Outcome, CliError> {
    for w in which {
        if !INVARIANTS.contains(&w.as_str()) {
            return Err(CliError::UnknownInvariant(w.clone()));
        }
    }
    let (metric, points) = input.prepare(opts)?;
    let pipeline = PipelineOptions { policy: opts.policy, tol: opts.tol, potential: false };
    let evaluated: Result<Vec<_>, _> = points.par_iter().map(|p| evaluate_point(&metric, p, &pipeline)).collect();
    let evaluated = evaluated?;
    let selected: Vec<BTreeMap<String, Residual>> = evaluated
        .iter()
        .map(|e| which.iter().filter_map(|w| e.residuals.get(w).map(|r| (w.clone(), *r))).collect())
        .collect();
    let pts: Vec<InvariantPoint> = evaluated
        .iter()
        .zip(&selected)
        .map(|(e, sel)| InvariantPoint {
            point: e.point.clone(),
            policy: e.policy,
            residuals: which.iter().map(|w| (w.clone(), sel.get(w).map(ResidualOut::from))).collect(),
        })
        .collect();

    let mut s = String::new();
    let k_provenance = match (&input.spec.potential, which.iter().any(|w| w == "cspace")) {
        (Some(phi), true) => {
            let grads: Vec<Expr> = metric.chart.coords().iter().map(|c| phi.diff(c).simplify()).collect();
            let mut dev = 0.0f64;
            for e in &evaluated {
                let Some(k) = &e.k else {
                    dev = f64::INFINITY;
                    continue;
                };
                let b = bindings(&metric, &e.point);
                for (g, ka) in grads.iter().zip(k) {
                    let d = g.eval(&b).map_err(GeometryError::from)?;
                    dev = dev.max((ka - d).abs() / (1.0 + d.abs()));
                }
            }
            let agree = dev < 1e-7;
            let _ = writeln!(s, "K: dual-tensor formula vs gradient of the potential {} (max deviation {dev:.3e})", if agree { "agree" } else { "differ" });
            Some(PotentialCheck { max_deviation: dev, agree })
        }
        _ => None,
    };

    let covariance = match &input.spec.upsilon {
        Some(ups) => {
            let hat = metric.conformal_rescale(ups);
            let mut exps = BTreeMap::new();
            for w in which {
                let mut fits = Vec::new();
                for p in &points {
                    let u = ups.eval(&bindings(&metric, p)).map_err(GeometryError::from)?;
                    let a = invariant_tensor(&CurvaturePack::<Jet>::at_point(&metric, p)?, w, opts.policy, &opts.tol);
                    let b = invariant_tensor(&CurvaturePack::<Jet>::at_point(&hat, p)?, w, opts.policy, &opts.tol);
                    if let (Some(a), Some(b)) = (a, b) {
                        if let Some(f) = fit_exponent(&a, &b, u, 1e-6) {
                            fits.push(f);
                        }
                    }
                }
                let e = (!fits.is_empty()).then(|| {
                    let mean = fits.iter().map(|f| f.0).sum::<f64>() / fits.len() as f64;
                    let spread = fits.iter().map(|f| f.1.max((f.0 - mean).abs())).fold(0.0, f64::max);
                    Exponent { mean, spread }
                });
                if let Some(e) = &e {
                    let _ = writeln!(s, "weight of {w} under e^(2Υ)g: {:.6} ± {:.1e}", e.mean, e.spread);
                }
                exps.insert(w.clone(), e);
            }
            Some(Covariance { upsilon: ups.to_string(), exponents: exps })
        }
        None => None,
    };

    let table = residual_table(&selected);
    let _ = writeln!(s, "{:<10} {:>12} {:>12}", "invariant", "max norm", "max rel");
    for w in which {
        match table.get(w) {
            Some(r) => {
                let _ = writeln!(s, "{w:<10} {:>12.3e} {:>12.3e}", r.max_norm, r.max_relative);
            }
            None => {
                let _ = writeln!(s, "{w:<10} {:>12}", "n/a");
            }
        }
    }
    let body = InvariantsBody { which: which.to_vec(), points: pts, residual_table: table, k_provenance, covariance };
    let settings = opts.settings();
    let json = to_json(&Envelope::new("invariants", &input.info, &settings, &body));
    Ok(Outcome { code: 0, summary: s, json })
}

// -------------------------------------------------------------- identities

#[derive(Serialize)]
struct IdentitiesBody<'a> {
    points: &'a [IdentityResiduals],
    residual_table: BTreeMap<String, f64>,
    passes: bool,
}

pub fn identities(input: &Input, opts: &Options) -> Result<Outcome, CliError> {
    let (metric, points) = input.prepare(opts)?;
    let suite = identity_suite(&metric, &points)?;
    let mut table: BTreeMap<String, f64> = BTreeMap::new();
    for r in &suite {
        for (k, v) in &r.residuals {
            let e = table.entry(k.clone()).or_insert(0.0);
            *e = e.max(v / r.scale.max(f64::MIN_POSITIVE));
        }
    }
    let passes = suite.iter().all(|r| r.passes(&opts.tol));
    let mut s = String::new();
    let _ = writeln!(s, "{:<24} {:>12}", "identity", "max rel");
    for (k, v) in &table {
        let _ = writeln!(s, "{k:<24} {v:>12.3e}");
    }
    let _ = writeln!(s, "{}", if passes { "all identities hold" } else { "identity check FAILED" });
    let settings = opts.settings();
    let json = to_json(&Envelope::new("identities", &input.info, &settings, IdentitiesBody { points: &suite, residual_table: table, passes }));
    Ok(Outcome { code: if passes { 0 } else { 1 }, summary: s, json })
}

// ----------------------------------------------------------------- tractor

#[derive(Serialize)]
struct TractorBody<'a> {
    sigma: Option<String>,
    parallel: Option<confein::tractor::ParallelReport>,
    einstein_scale: Option<bool>,
    rank: &'a RankReport,
}

/// Rank test, plus the parallel-tractor check when a scale is given.
/// `sigma` overrides the one in the file.
pub fn tractor(input: &Input, opts: &Options, sigma: Option<&str>) -> Result<Outcome, CliError> {
    let sigma: Option<Expr> = match sigma {
        Some(t) => Some(parse(t).map_err(|e| CliError::Usage(format!("--sigma: {e}")))?),
        None => input.spec.sigma.clone(),
    };
    let (metric, points) = input.prepare(opts)?;
    let rank = rank_obstruction(&metric, &points, &opts.tol)?;
    let parallel = sigma.as_ref().map(|s| parallel_tractor_check(&metric, s, &points, &opts.tol)).transpose()?;
    let mut s = String::new();
    if let Some(p) = &parallel {
        let _ = writeln!(s, "Einstein scale: {}", if p.einstein_scale { "yes" } else { "no" });
        for q in &p.points {
            let _ = writeln!(s, "  {} |∇I|/|I| = {:.3e}", fmt_point(&q.point), q.residual / q.norm.max(f64::MIN_POSITIVE));
        }
    }
    let _ = writeln!(s, "tractor-rank: {} ({})", rank.verdict, rank.reason);
    let code = match &parallel {
        Some(p) if p.einstein_scale => 0,
        Some(_) => 1,
        None => exit_code(rank.verdict),
    };
    let body = TractorBody { sigma: sigma.map(|e| e.to_string()), einstein_scale: parallel.as_ref().map(|p| p.einstein_scale), parallel, rank: &rank };
    let settings = opts.settings();
    let json = to_json(&Envelope::new("tractor", &input.info, &settings, body));
    Ok(Outcome { code, summary: s, json })
}

// ----------------------------------------------------------------- catalog

pub fn catalog_list() -> String {
    let mut s = String::new();
    for name in catalog::NAMES {
        if let Some(e) = catalog::by_name(name) {
            let _ = writeln!(s, "{name:<28} dim {}", e.dim());
        }
    }
    s
}

pub fn catalog_export(name: &str) -> Result<String, CliError> {
    let e = catalog::by_name(name).ok_or_else(|| CliError::UnknownEntry(name.to_string()))?;
    Ok(MetricSpec::from_entry(&e).write())
}
