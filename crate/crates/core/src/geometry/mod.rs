//! Charts, metric fields and index algebra.

mod connection;
mod frame;
mod tensor;

use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::expr::{Bindings, EvalError, EvalProgram, Expr};
use crate::jet::{Jet, JetSpace};
use crate::scalar::Coords;

pub use connection::LeviCivita;
pub use frame::{coframe_components, transform_slot};
pub use tensor::{factorial, multi_indices, permutation_sign, permutations, Slot, Tensor};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("dimension {0} is too small")]
    DimensionTooSmall(usize),
    #[error("coordinate `{0}` appears twice")]
    DuplicateCoordinate(String),
    #[error("slot {slot} out of range for rank {rank}")]
    SlotOutOfRange { slot: usize, rank: usize },
    #[error("slots of mixed variance")]
    MixedVariance,
    #[error("contraction needs one upper and one lower slot")]
    VarianceMismatch,
    #[error("metric is singular at {0}")]
    SingularMetric(String),
    #[error("coframe is singular at {0}")]
    SingularCoframe(String),
    #[error("metric is not symmetric: g[{0}][{1}] differs from g[{1}][{0}]")]
    Asymmetric(usize, usize),
    #[error("expected {expected} metric rows, found {found}")]
    Shape { expected: usize, found: usize },
    #[error("signature at {point} is {found:?}, reference is {reference:?}")]
    SignatureChange { point: String, found: (usize, usize), reference: (usize, usize) },
    #[error("could only draw {found} of {wanted} admissible sample points")]
    Sampling { wanted: usize, found: usize },
    #[error("sign of the metric determinant is not numerically known")]
    UnknownSign,
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Ordered coordinate symbols plus expressions whose zero set must be avoided.
#[derive(Clone, Debug)]
pub struct Chart {
    coords: Coords,
    pub singular: Vec<Expr>,
}

impl Chart {
    pub fn new(coords: Vec<String>, singular: Vec<Expr>) -> Result<Chart, GeometryError> {
        if coords.len() < 3 {
            return Err(GeometryError::DimensionTooSmall(coords.len()));
        }
        for (i, c) in coords.iter().enumerate() {
            if coords[..i].contains(c) {
                return Err(GeometryError::DuplicateCoordinate(c.clone()));
            }
        }
        Ok(Chart { coords: Arc::new(coords), singular })
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &Coords {
        &self.coords
    }

    pub fn format_point(&self, p: &[f64]) -> String {
        let parts: Vec<String> = self.coords.iter().zip(p).map(|(n, v)| format!("{n}={v}")).collect();
        format!("{{{}}}", parts.join(", "))
    }
}

/// A batch of scalar expressions on a chart compiled to one tape whose
/// inputs are the coordinates followed by the bound parameters.
#[derive(Clone, Debug)]
pub struct FieldProgram {
    program: EvalProgram,
    dim: usize,
    params: Vec<f64>,
}

impl FieldProgram {
    pub fn new(chart: &Chart, params: &Bindings, exprs: &[Expr]) -> Result<FieldProgram, GeometryError> {
        let mut inputs: Vec<String> = chart.coords.to_vec();
        let mut values = Vec::new();
        for (k, v) in params {
            if !chart.coords.contains(k) {
                inputs.push(k.clone());
                values.push(*v);
            }
        }
        let program = EvalProgram::compile_many(exprs, &inputs)?;
        Ok(FieldProgram { program, dim: chart.dim(), params: values })
    }

    pub fn values(&self, point: &[f64]) -> Result<Vec<f64>, GeometryError> {
        let mut inputs = point.to_vec();
        inputs.extend_from_slice(&self.params);
        Ok(self.program.run(&(), &inputs)?)
    }

    /// Taylor jets of every output at `point`.
    pub fn jets(&self, point: &[f64], order: usize) -> Result<Vec<Jet>, GeometryError> {
        let space = JetSpace::get(self.dim, order);
        let mut inputs: Vec<Jet> = point.iter().enumerate().map(|(i, &v)| Jet::variable(&space, i, v)).collect();
        inputs.extend(self.params.iter().map(|&v| Jet::constant(&space, v)));
        Ok(self.program.run(&space, &inputs)?)
    }
}

/// Symmetric (0,2) tensor field of Expr components on a chart.
#[derive(Clone, Debug)]
pub struct MetricField {
    pub chart: Chart,
    pub params: Bindings,
    components: Vec<Vec<Expr>>,
    program: OnceLock<Result<FieldProgram, GeometryError>>,
}

impl MetricField {
    /// Checks the shape and symmetry (after simplification) of `g`.
    pub fn new(chart: Chart, params: Bindings, g: Vec<Vec<Expr>>) -> Result<MetricField, GeometryError> {
        let n = chart.dim();
        if g.len() != n {
            return Err(GeometryError::Shape { expected: n, found: g.len() });
        }
        for row in &g {
            if row.len() != n {
                return Err(GeometryError::Shape { expected: n, found: row.len() });
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                if g[i][j] != g[j][i] && !(&g[i][j] - &g[j][i]).simplify().is_zero() {
                    return Err(GeometryError::Asymmetric(i, j));
                }
            }
        }
        Ok(MetricField { chart, params, components: g, program: OnceLock::new() })
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn components(&self) -> &[Vec<Expr>] {
        &self.components
    }

    /// `g_ab` as a weight-2 tensor of expressions.
    pub fn tensor(&self) -> Tensor<Expr> {
        Tensor::from_fn(self.dim(), vec![Slot::Down, Slot::Down], 2, |i| self.components[i[0]][i[1]].clone())
    }

    fn program(&self) -> Result<&FieldProgram, GeometryError> {
        self.program
            .get_or_init(|| {
                let n = self.dim();
                let flat: Vec<Expr> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).map(|(i, j)| self.components[i][j].clone()).collect();
                FieldProgram::new(&self.chart, &self.params, &flat)
            })
            .as_ref()
            .map_err(Clone::clone)
    }

    fn unpack<T: Clone>(&self, flat: Vec<T>) -> Vec<Vec<T>> {
        let n = self.dim();
        let mut pos = vec![vec![0usize; n]; n];
        let mut k = 0;
        for i in 0..n {
            for j in i..n {
                pos[i][j] = k;
                pos[j][i] = k;
                k += 1;
            }
        }
        pos.iter().map(|row| row.iter().map(|&k| flat[k].clone()).collect()).collect()
    }

    pub fn values_at(&self, point: &[f64]) -> Result<Vec<Vec<f64>>, GeometryError> {
        Ok(self.unpack(self.program()?.values(point)?))
    }

    /// Components as order-`order` jets about `point`.
    pub fn jets_at(&self, point: &[f64], order: usize) -> Result<Tensor<Jet>, GeometryError> {
        let m = self.unpack(self.program()?.jets(point, order)?);
        Ok(Tensor::from_fn(self.dim(), vec![Slot::Down, Slot::Down], 2, |i| m[i[0]][i[1]].clone()))
    }

    /// `(p, q)`: counts of positive and negative eigenvalues at `point`.
    pub fn signature_at(&self, point: &[f64]) -> Result<(usize, usize), GeometryError> {
        let g = self.values_at(point)?;
        let n = self.dim();
        let eig = SymmetricEigen::new(DMatrix::from_fn(n, n, |i, j| g[i][j]));
        let scale = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 || eig.eigenvalues.iter().any(|v| v.abs() <= 1e-12 * scale) {
            return Err(GeometryError::SingularMetric(self.chart.format_point(point)));
        }
        let p = eig.eigenvalues.iter().filter(|v| **v > 0.0).count();
        Ok((p, n - p))
    }

    /// Rejects points near a singular locus, where evaluation fails, or
    /// where the metric degenerates.
    pub fn admissible(&self, point: &[f64]) -> Result<(usize, usize), GeometryError> {
        if !self.chart.singular.is_empty() {
            let prog = FieldProgram::new(&self.chart, &self.params, &self.chart.singular)?;
            for v in prog.values(point)? {
                if !v.is_finite() || v.abs() < 1e-9 {
                    return Err(GeometryError::SingularMetric(self.chart.format_point(point)));
                }
            }
        }
        self.signature_at(point)
    }

    /// Draws `count` admissible points uniformly from the box (default
    /// `[0.5, 1.5]^n`) with a seeded ChaCha generator. All accepted points
    /// share the signature of the first.
    pub fn sample_points(&self, count: usize, seed: u64, ranges: Option<&[(f64, f64)]>) -> Result<Vec<Vec<f64>>, GeometryError> {
        let n = self.dim();
        let default = vec![(0.5, 1.5); n];
        let ranges = ranges.unwrap_or(&default);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out: Vec<Vec<f64>> = Vec::with_capacity(count);
        let mut reference = None;
        let mut tries = 0;
        while out.len() < count && tries < 200 * count.max(1) {
            tries += 1;
            let p: Vec<f64> = ranges.iter().map(|&(lo, hi)| if hi > lo { rng.random_range(lo..hi) } else { lo }).collect();
            let Ok(sig) = self.admissible(&p) else { continue };
            match reference {
                None => reference = Some(sig),
                Some(r) if r != sig => continue,
                _ => {}
            }
            out.push(p);
        }
        if out.len() < count {
            return Err(GeometryError::Sampling { wanted: count, found: out.len() });
        }
        Ok(out)
    }

    /// Validates user-supplied points: admissible and of one signature.
    pub fn check_points(&self, points: &[Vec<f64>]) -> Result<(usize, usize), GeometryError> {
        let mut reference = None;
        for p in points {
            let sig = self.admissible(p)?;
            match reference {
                None => reference = Some(sig),
                Some(r) if r != sig => {
                    return Err(GeometryError::SignatureChange { point: self.chart.format_point(p), found: sig, reference: r })
                }
                _ => {}
            }
        }
        reference.ok_or(GeometryError::Sampling { wanted: 1, found: 0 })
    }

    /// Symbolic inverse `g^{ab}`, weight −2.
    pub fn inverse(&self) -> Result<Tensor<Expr>, GeometryError> {
        let inv = <Expr as crate::scalar::Scalar>::invert(self.chart.coords(), &self.components)
            .ok_or_else(|| GeometryError::SingularMetric("all points".into()))?;
        let inv: Vec<Vec<Expr>> = inv.into_iter().map(|r| r.into_iter().map(|e| e.simplify()).collect()).collect();
        Ok(Tensor::from_fn(self.dim(), vec![Slot::Up, Slot::Up], -2, |i| inv[i[0]][i[1]].clone()))
    }

    /// `e^{2Υ} g`.
    pub fn conformal_rescale(&self, upsilon: &Expr) -> MetricField {
        let f = (Expr::int(2) * upsilon.clone()).exp();
        let g = self.components.iter().map(|r| r.iter().map(|e| if e.is_zero() { e.clone() } else { &f * e }).collect()).collect();
        MetricField { chart: self.chart.clone(), params: self.params.clone(), components: g, program: OnceLock::new() }
    }

    /// Replaces the parameter bindings.
    pub fn with_params(&self, params: Bindings) -> MetricField {
        MetricField { chart: self.chart.clone(), params, components: self.components.clone(), program: OnceLock::new() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn coords(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn diag(names: &[&str], entries: &[&str]) -> MetricField {
        let n = names.len();
        let g = (0..n).map(|i| (0..n).map(|j| if i == j { parse(entries[i]).unwrap() } else { Expr::zero() }).collect()).collect();
        MetricField::new(Chart::new(coords(names), vec![]).unwrap(), Bindings::new(), g).unwrap()
    }

    #[test]
    fn chart_validation() {
        assert!(matches!(Chart::new(coords(&["x", "y"]), vec![]), Err(GeometryError::DimensionTooSmall(2))));
        assert!(matches!(Chart::new(coords(&["x", "y", "x"]), vec![]), Err(GeometryError::DuplicateCoordinate(_))));
    }

    #[test]
    fn asymmetric_rejected() {
        let c = Chart::new(coords(&["x", "y", "z"]), vec![]).unwrap();
        let mut g = vec![vec![Expr::zero(); 3]; 3];
        for (i, row) in g.iter_mut().enumerate() {
            row[i] = Expr::one();
        }
        g[0][1] = parse("x").unwrap();
        assert!(matches!(MetricField::new(c, Bindings::new(), g), Err(GeometryError::Asymmetric(0, 1))));
    }

    #[test]
    fn euclidean_inverse_and_signature() {
        let m = diag(&["x", "y", "z"], &["1", "1", "1"]);
        let inv = m.inverse().unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(inv.get(&[i, j]).is_one(), i == j);
            }
        }
        assert_eq!(m.signature_at(&[0.0, 0.0, 0.0]).unwrap(), (3, 0));
        let l = diag(&["t", "x", "y", "z"], &["-1", "1", "1", "1"]);
        assert_eq!(l.signature_at(&[0.0; 4]).unwrap(), (3, 1));
    }

    #[test]
    fn degenerate_rejected() {
        let m = diag(&["x", "y", "z"], &["1", "0", "1"]);
        assert!(m.inverse().is_err());
        assert!(m.signature_at(&[1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn sampling_is_seeded_and_avoids_singular_loci() {
        let c = Chart::new(coords(&["r", "y", "z"]), vec![parse("r - 1").unwrap()]).unwrap();
        let g = vec![
            vec![parse("1/(r-1)^2").unwrap(), Expr::zero(), Expr::zero()],
            vec![Expr::zero(), Expr::one(), Expr::zero()],
            vec![Expr::zero(), Expr::zero(), Expr::one()],
        ];
        let m = MetricField::new(c, Bindings::new(), g).unwrap();
        let a = m.sample_points(10, 3, None).unwrap();
        let b = m.sample_points(10, 3, None).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|p| (p[0] - 1.0).abs() > 1e-9));
    }

    #[test]
    fn rescale_multiplies_components() {
        let m = diag(&["x", "y", "z"], &["1", "1", "1"]);
        let h = m.conformal_rescale(&parse("x").unwrap());
        let v = h.values_at(&[0.5, 0.0, 0.0]).unwrap();
        assert!((v[0][0] - 1f64.exp()).abs() < 1e-14);
        assert_eq!(v[0][1], 0.0);
        let z = m.conformal_rescale(&Expr::zero());
        assert_eq!(z.components(), m.components());
    }
}
