//! JSON report schema, version [`SCHEMA`].

use std::collections::BTreeMap;

use confein::curvature::Tolerances;
use confein::genericity::{Policy, PointGenericity};
use confein::obstructions::{Residual, Theorem, TheoremVerdict, Verdict};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const TOOL: &str = "confein";
pub const SCHEMA: u32 = 1;

#[derive(Clone, Debug, Serialize)]
pub struct InputInfo {
    pub name: Option<String>,
    pub sha256: String,
    pub dim: usize,
    pub coords: Vec<String>,
}

impl InputInfo {
    pub fn new(name: Option<String>, coords: Vec<String>, bytes: &[u8]) -> InputInfo {
        let digest = Sha256::digest(bytes);
        InputInfo { name, sha256: format!("{digest:x}"), dim: coords.len(), coords }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Settings {
    pub tolerances: Tolerances,
    pub points: usize,
    pub seed: u64,
    pub policy: String,
}

/// Common header wrapped around every command body.
#[derive(Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub schema: u32,
    pub command: &'a str,
    pub input: &'a InputInfo,
    pub settings: &'a Settings,
    #[serde(flatten)]
    pub body: T,
}

impl<'a, T: Serialize> Envelope<'a, T> {
    pub fn new(command: &'a str, input: &'a InputInfo, settings: &'a Settings, body: T) -> Self {
        Envelope { tool: TOOL, version: env!("CARGO_PKG_VERSION"), schema: SCHEMA, command, input, settings, body }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ResidualOut {
    pub norm: f64,
    pub scale: f64,
    pub relative: f64,
}

impl From<&Residual> for ResidualOut {
    fn from(r: &Residual) -> Self {
        ResidualOut { norm: r.norm, scale: r.scale, relative: r.relative() }
    }
}

/// Worst value of one named residual over all points.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TableRow {
    pub max_norm: f64,
    pub max_relative: f64,
    pub points: usize,
}

pub fn residual_table<'a>(rows: impl IntoIterator<Item = &'a BTreeMap<String, Residual>>) -> BTreeMap<String, TableRow> {
    let mut table: BTreeMap<String, TableRow> = BTreeMap::new();
    for r in rows {
        for (k, v) in r {
            let row = table.entry(k.clone()).or_insert(TableRow { max_norm: 0.0, max_relative: 0.0, points: 0 });
            row.max_norm = row.max_norm.max(v.norm);
            row.max_relative = row.max_relative.max(v.relative());
            row.points += 1;
        }
    }
    table
}

#[derive(Clone, Debug, Serialize)]
pub struct RankOut {
    pub rank: usize,
    pub weakly_generic: bool,
    pub singular_values: Vec<f64>,
    pub kernel: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PointOut {
    pub point: Vec<f64>,
    pub scale: f64,
    pub genericity: PointGenericity,
    pub policy: Option<Policy>,
    pub k: Option<Vec<f64>>,
    pub applicable: Vec<Theorem>,
    pub residuals: BTreeMap<String, ResidualOut>,
    pub tractor: Option<RankOut>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TheoremOut {
    pub id: Theorem,
    pub precondition: &'static str,
    pub verdict: Verdict,
    pub applicable_points: usize,
    pub worst_relative: Option<f64>,
    pub reason: Option<String>,
}

impl From<&TheoremVerdict> for TheoremOut {
    fn from(t: &TheoremVerdict) -> Self {
        TheoremOut {
            id: t.theorem,
            precondition: t.precondition,
            verdict: t.verdict,
            applicable_points: t.applicable_points,
            worst_relative: t.worst_relative,
            reason: None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PotentialOut {
    pub closedness: Option<f64>,
    pub values: Option<Vec<f64>>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ClassifyBody {
    pub points: Vec<PointOut>,
    pub residual_table: BTreeMap<String, TableRow>,
    pub theorems: Vec<TheoremOut>,
    pub verdict: Verdict,
    pub decided_by: Option<Theorem>,
    /// Every conclusive theorem that agrees with the verdict.
    pub cited: Vec<Theorem>,
    pub reason: String,
    pub notes: Vec<String>,
    pub potential: Option<PotentialOut>,
}

pub fn exit_code(v: Verdict) -> i32 {
    match v {
        Verdict::ConformallyEinstein => 0,
        Verdict::NotConformallyEinstein => 1,
        Verdict::Inconclusive => 2,
    }
}

pub fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serialises");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_is_hex_sha256() {
        let i = InputInfo::new(None, vec!["x".into()], b"abc");
        assert_eq!(i.sha256, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn table_takes_worst_point() {
        let a = BTreeMap::from([("E".to_string(), Residual::new(1.0, 10.0))]);
        let b = BTreeMap::from([("E".to_string(), Residual::new(3.0, 100.0))]);
        let t = residual_table([&a, &b]);
        assert_eq!(t["E"], TableRow { max_norm: 3.0, max_relative: 0.1, points: 2 });
    }
}
