//! Metric definition files.
//!
//! Line-oriented `key = value`; `#` starts a comment. Recognised keys:
//!
//! ```text
//! name = schwarzschild
//! coords = u, r, x1, x2
//! param.m = 1
//! g[u][r] = 1            # indices are positions or coordinate names
//! g[1][1] = 0            # the transpose is filled in
//! singular = r           # repeatable; points near zeros are rejected
//! box[r] = 1.5, 3        # sampling interval
//! point = 0.5, 2, 0.1, 0 # repeatable; overrides sampling
//! upsilon = log(r)       # conformal factor for covariance runs
//! potential = ...        # φ with K = dφ solving the C-space equation
//! sigma = 1              # candidate Einstein scale
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;

use confein::catalog::CatalogEntry;
use confein::expr::{parse, Bindings, Expr};
use confein::geometry::{Chart, GeometryError, MetricField};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: `{key}` given twice")]
    Duplicate { line: usize, key: String },
    #[error("line {line}: g[{i}][{j}] conflicts with g[{j}][{i}] from line {other}")]
    Conflict { line: usize, i: usize, j: usize, other: usize },
    #[error("line {line}: {source}")]
    Expr { line: usize, source: confein::expr::ParseError },
    #[error("missing `coords`")]
    MissingCoords,
    #[error("`dim = {declared}` but {found} coordinates given")]
    DimensionMismatch { declared: usize, found: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricSpec {
    pub name: Option<String>,
    pub coords: Vec<String>,
    pub params: Bindings,
    pub components: Vec<Vec<Expr>>,
    pub singular: Vec<Expr>,
    pub sample_box: Option<Vec<(f64, f64)>>,
    pub points: Vec<Vec<f64>>,
    pub upsilon: Option<Expr>,
    pub potential: Option<Expr>,
    pub sigma: Option<Expr>,
}

fn syntax(line: usize, message: impl Into<String>) -> SpecError {
    SpecError::Syntax { line, message: message.into() }
}

fn numbers(line: usize, text: &str) -> Result<Vec<f64>, SpecError> {
    text.split(',').map(|t| t.trim().parse::<f64>().map_err(|_| syntax(line, format!("`{}` is not a number", t.trim())))).collect()
}

/// `[a][b]...` after a key; returns the bracket contents.
fn brackets(line: usize, text: &str) -> Result<Vec<String>, SpecError> {
    let mut out = Vec::new();
    let mut rest = text.trim();
    while !rest.is_empty() {
        let inner = rest.strip_prefix('[').ok_or_else(|| syntax(line, "expected `[`"))?;
        let close = inner.find(']').ok_or_else(|| syntax(line, "unclosed `[`"))?;
        out.push(inner[..close].trim().to_string());
        rest = inner[close + 1..].trim_start();
    }
    Ok(out)
}

struct Builder {
    coords: Option<(usize, Vec<String>)>,
    dim: Option<usize>,
    seen: BTreeMap<String, usize>,
    entries: Vec<(usize, Vec<String>, Expr)>,
    boxes: Vec<(usize, String, (f64, f64))>,
}

impl Builder {
    fn once(&mut self, line: usize, key: &str) -> Result<(), SpecError> {
        if self.seen.insert(key.to_string(), line).is_some() {
            return Err(SpecError::Duplicate { line, key: key.to_string() });
        }
        Ok(())
    }
}

fn index(line: usize, coords: &[String], s: &str) -> Result<usize, SpecError> {
    if let Ok(i) = s.parse::<usize>() {
        if i < coords.len() {
            return Ok(i);
        }
        return Err(syntax(line, format!("index {i} out of range")));
    }
    coords.iter().position(|c| c == s).ok_or_else(|| syntax(line, format!("unknown coordinate `{s}`")))
}

impl MetricSpec {
    pub fn parse(text: &str) -> Result<MetricSpec, SpecError> {
        let mut b = Builder { coords: None, dim: None, seen: BTreeMap::new(), entries: Vec::new(), boxes: Vec::new() };
        let mut spec = MetricSpec {
            name: None,
            coords: Vec::new(),
            params: Bindings::new(),
            components: Vec::new(),
            singular: Vec::new(),
            sample_box: None,
            points: Vec::new(),
            upsilon: None,
            potential: None,
            sigma: None,
        };
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let content = raw.split('#').next().unwrap().trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| syntax(line, "expected `key = value`"))?;
            let (key, value) = (key.trim(), value.trim());
            let expr = |v: &str| parse(v).map_err(|source| SpecError::Expr { line, source });
            match key {
                "name" => {
                    b.once(line, key)?;
                    spec.name = Some(value.to_string());
                }
                "dim" => {
                    b.once(line, key)?;
                    b.dim = Some(value.parse().map_err(|_| syntax(line, "`dim` must be an integer"))?);
                }
                "coords" => {
                    b.once(line, key)?;
                    b.coords = Some((line, value.split(',').map(|c| c.trim().to_string()).collect()));
                }
                "singular" => spec.singular.push(expr(value)?),
                "point" => spec.points.push(numbers(line, value)?),
                "upsilon" | "potential" | "sigma" => {
                    b.once(line, key)?;
                    let e = Some(expr(value)?);
                    match key {
                        "upsilon" => spec.upsilon = e,
                        "potential" => spec.potential = e,
                        _ => spec.sigma = e,
                    }
                }
                _ if key.starts_with("param.") => {
                    b.once(line, key)?;
                    let name = &key["param.".len()..];
                    let v = value.parse::<f64>().map_err(|_| syntax(line, format!("parameter `{name}` needs a number")))?;
                    spec.params.insert(name.to_string(), v);
                }
                _ if key.starts_with("g[") => {
                    let idx = brackets(line, &key[1..])?;
                    if idx.len() != 2 {
                        return Err(syntax(line, "metric entries take two indices"));
                    }
                    b.entries.push((line, idx, expr(value)?));
                }
                _ if key.starts_with("box[") => {
                    let idx = brackets(line, &key[3..])?;
                    let v = numbers(line, value)?;
                    if idx.len() != 1 || v.len() != 2 || v[0] > v[1] {
                        return Err(syntax(line, "expected `box[i] = lo, hi`"));
                    }
                    b.boxes.push((line, idx[0].clone(), (v[0], v[1])));
                }
                _ => return Err(SpecError::UnknownKey { line, key: key.to_string() }),
            }
        }
        let (_, coords) = b.coords.take().ok_or(SpecError::MissingCoords)?;
        let n = coords.len();
        if let Some(d) = b.dim {
            if d != n {
                return Err(SpecError::DimensionMismatch { declared: d, found: n });
            }
        }
        let mut given: Vec<Vec<Option<(usize, Expr)>>> = vec![vec![None; n]; n];
        for (line, idx, e) in b.entries {
            let (i, j) = (index(line, &coords, &idx[0])?, index(line, &coords, &idx[1])?);
            if given[i][j].is_some() {
                return Err(SpecError::Duplicate { line, key: format!("g[{i}][{j}]") });
            }
            if let Some((other, prev)) = &given[j][i] {
                if i != j && prev != &e && !(prev - &e).simplify().is_zero() {
                    return Err(SpecError::Conflict { line, i, j, other: *other });
                }
            }
            given[i][j] = Some((line, e));
        }
        spec.components = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| given[i][j].as_ref().or(given[j][i].as_ref()).map_or_else(Expr::zero, |(_, e)| e.clone()))
                    .collect()
            })
            .collect();
        if !b.boxes.is_empty() {
            let mut bx = vec![(0.5, 1.5); n];
            for (line, name, r) in b.boxes {
                bx[index(line, &coords, &name)?] = r;
            }
            spec.sample_box = Some(bx);
        }
        for (k, p) in spec.points.iter().enumerate() {
            if p.len() != n {
                return Err(syntax(0, format!("point {} has {} coordinates, expected {n}", k + 1, p.len())));
            }
        }
        spec.coords = coords;
        Ok(spec)
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn metric(&self) -> Result<MetricField, SpecError> {
        let chart = Chart::new(self.coords.clone(), self.singular.clone())?;
        Ok(MetricField::new(chart, self.params.clone(), self.components.clone())?)
    }

    /// Explicit points if any, otherwise `count` seeded samples.
    pub fn sample_points(&self, metric: &MetricField, count: usize, seed: u64) -> Result<Vec<Vec<f64>>, SpecError> {
        if self.points.is_empty() {
            Ok(metric.sample_points(count, seed, self.sample_box.as_deref())?)
        } else {
            metric.check_points(&self.points)?;
            Ok(self.points.clone())
        }
    }

    pub fn from_entry(e: &CatalogEntry) -> MetricSpec {
        MetricSpec {
            name: Some(e.name.clone()),
            coords: e.metric.chart.coords().to_vec(),
            params: e.metric.params.clone(),
            components: e.metric.components().to_vec(),
            singular: e.metric.chart.singular.clone(),
            sample_box: Some(e.sample_box.clone()),
            points: Vec::new(),
            upsilon: None,
            potential: e.cspace_potential.clone(),
            sigma: e.einstein_scale.clone(),
        }
    }

    /// Canonical text form; [`MetricSpec::parse`] reads it back unchanged.
    pub fn write(&self) -> String {
        let mut s = String::new();
        if let Some(name) = &self.name {
            let _ = writeln!(s, "name = {name}");
        }
        let _ = writeln!(s, "dim = {}", self.dim());
        let _ = writeln!(s, "coords = {}", self.coords.join(", "));
        for (k, v) in &self.params {
            let _ = writeln!(s, "param.{k} = {v:?}");
        }
        for e in &self.singular {
            let _ = writeln!(s, "singular = {e}");
        }
        for (i, row) in self.components.iter().enumerate() {
            for (j, e) in row.iter().enumerate().skip(i) {
                if !e.is_zero() {
                    let _ = writeln!(s, "g[{}][{}] = {e}", self.coords[i], self.coords[j]);
                }
            }
        }
        if let Some(bx) = &self.sample_box {
            for (c, (lo, hi)) in self.coords.iter().zip(bx) {
                let _ = writeln!(s, "box[{c}] = {lo:?}, {hi:?}");
            }
        }
        for p in &self.points {
            let _ = writeln!(s, "point = {}", p.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(", "));
        }
        for (key, e) in [("upsilon", &self.upsilon), ("potential", &self.potential), ("sigma", &self.sigma)] {
            if let Some(e) = e {
                let _ = writeln!(s, "{key} = {e}");
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SPHERE: &str = "\
# round 3-sphere, stereographic
coords = x, y, z
param.k = 1
g[0][0] = 1/(1 + k*(x^2 + y^2 + z^2)/4)^2
g[y][y] = 1/(1 + k*(x^2 + y^2 + z^2)/4)^2
g[2][2] = 1/(1 + k*(x^2 + y^2 + z^2)/4)^2
box[x] = -0.5, 0.5
point = 0.1, 0.2, 0.3
";

    #[test]
    fn parses_and_completes() {
        let s = MetricSpec::parse(SPHERE).unwrap();
        assert_eq!(s.coords, ["x", "y", "z"]);
        assert_eq!(s.params["k"], 1.0);
        assert!(s.components[0][1].is_zero());
        assert_eq!(s.sample_box.as_ref().unwrap()[0], (-0.5, 0.5));
        assert_eq!(s.sample_box.as_ref().unwrap()[1], (0.5, 1.5));
        let off = MetricSpec::parse("coords = a, b, c\ng[0][0] = 1\ng[1][1] = 1\ng[2][2] = 1\ng[a][b] = a*b\n").unwrap();
        assert_eq!(off.components[1][0], off.components[0][1]);
    }

    #[test]
    fn round_trips() {
        let s = MetricSpec::parse(SPHERE).unwrap();
        assert_eq!(MetricSpec::parse(&s.write()).unwrap(), s);
    }

    #[test]
    fn rejects_bad_input() {
        let conflict = "coords = a, b, c\ng[0][1] = a\ng[1][0] = b\n";
        assert_eq!(MetricSpec::parse(conflict).unwrap_err(), SpecError::Conflict { line: 3, i: 1, j: 0, other: 2 });
        let same = "coords = a, b, c\ng[0][1] = a*b\ng[1][0] = b*a\n";
        assert!(MetricSpec::parse(same).is_ok());
        assert!(matches!(MetricSpec::parse("coords = a, b, c\nfoo = 1\n"), Err(SpecError::UnknownKey { line: 2, .. })));
        assert!(matches!(MetricSpec::parse("coords = a, b, c\ng[0][0] = (a\n"), Err(SpecError::Expr { line: 2, .. })));
        assert!(matches!(MetricSpec::parse("g[0][0] = 1\n"), Err(SpecError::MissingCoords)));
        assert!(matches!(MetricSpec::parse("coords = a, b, c\ng[q][0] = 1\n"), Err(SpecError::Syntax { line: 2, .. })));
        assert!(matches!(MetricSpec::parse("dim = 4\ncoords = a, b, c\n"), Err(SpecError::DimensionMismatch { .. })));
        assert!(matches!(MetricSpec::parse("coords = a, b, c\nno equals\n"), Err(SpecError::Syntax { line: 2, .. })));
    }
}
