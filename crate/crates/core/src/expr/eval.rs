use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use super::{Expr, Func, Node};

pub type Bindings = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("unbound symbol `{0}`")]
    Unbound(String),
    #[error("domain error in {op} at point {point}")]
    Domain { op: &'static str, point: String },
}

pub(crate) fn format_point(names: &[String], values: &[f64]) -> String {
    let parts: Vec<String> = names.iter().zip(values).map(|(n, v)| format!("{n}={v}")).collect();
    format!("{{{}}}", parts.join(", "))
}

/// Numeric types the evaluator can run on: plain floats and truncated
/// Taylor jets.
pub trait Value: Clone + Send + Sync {
    type Ctx: Clone + Send + Sync;

    fn lift(ctx: &Self::Ctx, v: f64) -> Self;
    /// The constant part; domain checks look only at this.
    fn re(&self) -> f64;
    fn add(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    fn recip(&self) -> Self;
    fn powi(&self, k: i32) -> Self;
    fn powf(&self, k: f64) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn sqrt(&self) -> Self {
        self.powf(0.5)
    }
    fn pow(&self, e: &Self) -> Self {
        e.mul(&self.ln()).exp()
    }
}

impl Value for f64 {
    type Ctx = ();
    fn lift(_: &(), v: f64) -> f64 {
        v
    }
    fn re(&self) -> f64 {
        *self
    }
    fn add(&self, o: &f64) -> f64 {
        self + o
    }
    fn mul(&self, o: &f64) -> f64 {
        self * o
    }
    fn neg(&self) -> f64 {
        -self
    }
    fn recip(&self) -> f64 {
        1.0 / self
    }
    fn powi(&self, k: i32) -> f64 {
        f64::powi(*self, k)
    }
    fn powf(&self, k: f64) -> f64 {
        f64::powf(*self, k)
    }
    fn exp(&self) -> f64 {
        f64::exp(*self)
    }
    fn ln(&self) -> f64 {
        f64::ln(*self)
    }
    fn sin(&self) -> f64 {
        f64::sin(*self)
    }
    fn cos(&self) -> f64 {
        f64::cos(*self)
    }
    fn sqrt(&self) -> f64 {
        f64::sqrt(*self)
    }
    fn pow(&self, e: &f64) -> f64 {
        f64::powf(*self, *e)
    }
}

/// Domain checks shared by the tree walker and the tape interpreter.
pub(crate) mod domain {
    pub fn log_ok(x: f64) -> bool {
        x > 0.0
    }
    pub fn recip_ok(x: f64) -> bool {
        x != 0.0
    }
    pub fn powf_ok(x: f64, k: f64) -> bool {
        if k.fract() == 0.0 {
            return k >= 0.0 || x != 0.0;
        }
        if k > 0.0 {
            x >= 0.0
        } else {
            x > 0.0
        }
    }
}

impl Expr {
    /// Direct recursive evaluation.
    pub fn eval(&self, b: &Bindings) -> Result<f64, EvalError> {
        let mut memo = HashMap::new();
        let point = || {
            let names: Vec<String> = b.keys().cloned().collect();
            let vals: Vec<f64> = b.values().copied().collect();
            format_point(&names, &vals)
        };
        walk(self, b, &mut memo).map_err(|op| match op {
            Walk::Unbound(s) => EvalError::Unbound(s),
            Walk::Domain(op) => EvalError::Domain { op, point: point() },
        })
    }
}

enum Walk {
    Unbound(String),
    Domain(&'static str),
}

fn walk(e: &Expr, b: &Bindings, memo: &mut HashMap<Expr, f64>) -> Result<f64, Walk> {
    if let Some(v) = memo.get(e) {
        return Ok(*v);
    }
    let v = match e.node() {
        Node::Rational(_) | Node::Float(_) => e.to_f64().unwrap(),
        Node::Symbol(s) => *b.get(&**s).ok_or_else(|| Walk::Unbound(s.to_string()))?,
        Node::Sum(ts) => {
            let mut acc = 0.0;
            for t in ts {
                acc += walk(t, b, memo)?;
            }
            acc
        }
        Node::Product(fs) => {
            let mut acc = 1.0;
            for f in fs {
                acc *= walk(f, b, memo)?;
            }
            acc
        }
        Node::Power(base, x) => {
            let bv = walk(base, b, memo)?;
            match x.to_f64() {
                Some(k) => {
                    if !domain::powf_ok(bv, k) {
                        return Err(Walk::Domain(if k < 0.0 { "division" } else { "fractional power" }));
                    }
                    if k.fract() == 0.0 && k.abs() < i32::MAX as f64 {
                        bv.powi(k as i32)
                    } else {
                        bv.powf(k)
                    }
                }
                None => {
                    let xv = walk(x, b, memo)?;
                    if !domain::log_ok(bv) {
                        return Err(Walk::Domain("power"));
                    }
                    bv.powf(xv)
                }
            }
        }
        Node::Func(f, a) => {
            let av = walk(a, b, memo)?;
            match f {
                Func::Exp => av.exp(),
                Func::Log => {
                    if !domain::log_ok(av) {
                        return Err(Walk::Domain("log"));
                    }
                    av.ln()
                }
                Func::Sin => av.sin(),
                Func::Cos => av.cos(),
            }
        }
    };
    memo.insert(e.clone(), v);
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn bind(pairs: &[(&str, f64)]) -> Bindings {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn values() {
        assert_eq!(parse("2*r").unwrap().eval(&bind(&[("r", 3.0)])), Ok(6.0));
        assert_eq!(parse("24/rho^3").unwrap().eval(&bind(&[("rho", 2.0)])), Ok(3.0));
    }

    #[test]
    fn errors() {
        let e = parse("m/r").unwrap();
        assert_eq!(e.eval(&bind(&[("r", 1.0)])), Err(EvalError::Unbound("m".into())));
        match e.eval(&bind(&[("m", 1.0), ("r", 0.0)])) {
            Err(EvalError::Domain { point, .. }) => assert!(point.contains("r=0"), "{point}"),
            other => panic!("{other:?}"),
        }
        assert!(parse("log(x)").unwrap().eval(&bind(&[("x", -1.0)])).is_err());
        assert!(parse("sqrt(x)").unwrap().eval(&bind(&[("x", -1.0)])).is_err());
    }
}
