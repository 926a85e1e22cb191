//! Symbolic scalar expressions.
//!
//! An [`Expr`] is an immutable, structurally shared tree. Every constructor
//! returns the canonical form: sums and products are flattened and sorted,
//! like terms are collected, equal bases in a product have their exponents
//! merged, and rational constants are folded exactly. Negation and division
//! are not separate node kinds: `-x` is the product `(-1)*x` and `a/b` is
//! `a*b^(-1)`. The printer restores the usual surface syntax.

mod compile;
mod diff;
mod eval;
mod num;
mod parse;
mod print;
mod simplify;

use std::collections::BTreeMap;
use std::hash::{DefaultHasher, Hash, Hasher};
use std::sync::Arc;

pub use compile::{EvalProgram, Instr};
pub use eval::{Bindings, EvalError, Value};
pub use num::{format_float, Flt, Num, Q};
pub use parse::{parse, ParseError};

use num_traits::{One, Signed, ToPrimitive};

pub type Symbol = Arc<str>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Node {
    Rational(Q),
    Float(Flt),
    Symbol(Symbol),
    Sum(Vec<Expr>),
    Product(Vec<Expr>),
    Power(Expr, Expr),
    Func(Func, Expr),
}

#[derive(Debug)]
struct Inner {
    hash: u64,
    node: Node,
}

#[derive(Clone, Debug)]
pub struct Expr(Arc<Inner>);

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || (self.0.hash == other.0.hash && self.0.node == other.0.node)
    }
}
impl Eq for Expr {}

impl Hash for Expr {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u64(self.0.hash)
    }
}

impl PartialOrd for Expr {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Expr {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        if Arc::ptr_eq(&self.0, &other.0) {
            return std::cmp::Ordering::Equal;
        }
        self.0.node.cmp(&other.0.node)
    }
}

impl Expr {
    fn raw(node: Node) -> Expr {
        let mut h = DefaultHasher::new();
        node.hash(&mut h);
        Expr(Arc::new(Inner { hash: h.finish(), node }))
    }

    pub fn node(&self) -> &Node {
        &self.0.node
    }

    // ---- leaves ----

    pub fn rational(q: Q) -> Expr {
        Expr::raw(Node::Rational(q))
    }

    pub fn int(v: i64) -> Expr {
        Expr::rational(Q::from_integer(v as i128))
    }

    pub fn ratio(num: i64, den: i64) -> Expr {
        assert!(den != 0, "zero denominator in rational constant");
        Expr::rational(Q::new(num as i128, den as i128))
    }

    pub fn float(v: f64) -> Expr {
        Expr::raw(Node::Float(Flt(v)))
    }

    pub fn num(n: Num) -> Expr {
        match n {
            Num::Rat(q) => Expr::rational(q),
            Num::Flt(f) => Expr::float(f),
        }
    }

    /// Exact rational when `v` is a dyadic fraction with a small denominator,
    /// otherwise a float constant.
    pub fn from_f64(v: f64) -> Expr {
        if v.is_finite() {
            for k in 0..=20 {
                let scaled = v * (1u64 << k) as f64;
                if scaled.fract() == 0.0 && scaled.abs() < 9.0e15 {
                    return Expr::rational(Q::new(scaled as i128, 1i128 << k));
                }
            }
        }
        Expr::float(v)
    }

    pub fn symbol(name: &str) -> Expr {
        Expr::raw(Node::Symbol(Arc::from(name)))
    }

    pub fn zero() -> Expr {
        Expr::int(0)
    }

    pub fn one() -> Expr {
        Expr::int(1)
    }

    // ---- inspection ----

    pub fn as_num(&self) -> Option<Num> {
        match self.node() {
            Node::Rational(q) => Some(Num::Rat(*q)),
            Node::Float(f) => Some(Num::Flt(f.0)),
            _ => None,
        }
    }

    pub fn as_rational(&self) -> Option<Q> {
        match self.node() {
            Node::Rational(q) => Some(*q),
            _ => None,
        }
    }

    pub fn as_symbol(&self) -> Option<&str> {
        match self.node() {
            Node::Symbol(s) => Some(s),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_num().is_some_and(Num::is_zero)
    }

    pub fn is_one(&self) -> bool {
        self.as_num().is_some_and(Num::is_one)
    }

    pub fn is_number(&self) -> bool {
        self.as_num().is_some()
    }

    /// Number of nodes, counting shared subtrees once per occurrence.
    pub fn size(&self) -> usize {
        1 + match self.node() {
            Node::Sum(v) | Node::Product(v) => v.iter().map(Expr::size).sum(),
            Node::Power(b, e) => b.size() + e.size(),
            Node::Func(_, a) => a.size(),
            _ => 0,
        }
    }

    pub fn free_symbols(&self) -> std::collections::BTreeSet<String> {
        let mut out = std::collections::BTreeSet::new();
        self.collect_symbols(&mut out);
        out
    }

    fn collect_symbols(&self, out: &mut std::collections::BTreeSet<String>) {
        match self.node() {
            Node::Symbol(s) => {
                out.insert(s.to_string());
            }
            Node::Sum(v) | Node::Product(v) => v.iter().for_each(|e| e.collect_symbols(out)),
            Node::Power(b, e) => {
                b.collect_symbols(out);
                e.collect_symbols(out);
            }
            Node::Func(_, a) => a.collect_symbols(out),
            _ => {}
        }
    }

    pub fn contains_symbol(&self, s: &str) -> bool {
        match self.node() {
            Node::Symbol(t) => &**t == s,
            Node::Sum(v) | Node::Product(v) => v.iter().any(|e| e.contains_symbol(s)),
            Node::Power(b, e) => b.contains_symbol(s) || e.contains_symbol(s),
            Node::Func(_, a) => a.contains_symbol(s),
            _ => false,
        }
    }

    /// Splits a term into numeric coefficient and the remaining factor.
    fn split_coeff(&self) -> (Num, Expr) {
        if let Some(n) = self.as_num() {
            return (n, Expr::one());
        }
        if let Node::Product(fs) = self.node() {
            if let Some(n) = fs[0].as_num() {
                let rest = if fs.len() == 2 { fs[1].clone() } else { Expr::raw(Node::Product(fs[1..].to_vec())) };
                return (n, rest);
            }
        }
        (Num::one(), self.clone())
    }

    /// Splits a factor into base and exponent.
    fn split_power(&self) -> (Expr, Expr) {
        match self.node() {
            Node::Power(b, e) => (b.clone(), e.clone()),
            _ => (self.clone(), Expr::one()),
        }
    }

    /// True for a sum term that prints with a leading minus sign.
    pub(crate) fn has_negative_coeff(&self) -> bool {
        self.split_coeff().0.is_negative()
    }

    // ---- canonical constructors ----

    pub fn add_all<I: IntoIterator<Item = Expr>>(terms: I) -> Expr {
        let mut constant = Num::zero();
        let mut collected: BTreeMap<Expr, Num> = BTreeMap::new();
        let mut stack: Vec<Expr> = terms.into_iter().collect();
        while let Some(t) = stack.pop() {
            match t.node() {
                Node::Sum(inner) => stack.extend(inner.iter().cloned()),
                _ => {
                    let (c, rest) = t.split_coeff();
                    if rest.is_one() {
                        constant = constant.add(c);
                    } else {
                        let slot = collected.entry(rest).or_insert_with(Num::zero);
                        *slot = slot.add(c);
                    }
                }
            }
        }
        let mut out: Vec<Expr> = Vec::with_capacity(collected.len() + 1);
        if !constant.is_zero() {
            out.push(Expr::num(constant));
        }
        for (rest, c) in collected {
            if c.is_zero() {
                continue;
            }
            if c.is_one() {
                out.push(rest);
            } else {
                out.push(Expr::mul_all([Expr::num(c), rest]));
            }
        }
        match out.len() {
            0 => Expr::zero(),
            1 => out.pop().unwrap(),
            _ => {
                // Rebuilt terms may themselves be sums (a float coefficient
                // distributing over a sum) so re-flatten when that happens.
                if out.iter().any(|t| matches!(t.node(), Node::Sum(_))) {
                    return Expr::add_all(out);
                }
                out.sort();
                Expr::raw(Node::Sum(out))
            }
        }
    }

    pub fn mul_all<I: IntoIterator<Item = Expr>>(factors: I) -> Expr {
        let mut coeff = Num::one();
        let mut bases: BTreeMap<Expr, Vec<Expr>> = BTreeMap::new();
        let mut stack: Vec<Expr> = factors.into_iter().collect();
        while let Some(f) = stack.pop() {
            match f.node() {
                Node::Product(inner) => stack.extend(inner.iter().cloned()),
                Node::Rational(_) | Node::Float(_) => coeff = coeff.mul(f.as_num().unwrap()),
                _ => {
                    let (b, e) = f.split_power();
                    bases.entry(b).or_default().push(e);
                }
            }
        }
        if coeff.is_zero() {
            return Expr::num(coeff);
        }
        let mut out: Vec<Expr> = Vec::with_capacity(bases.len());
        let mut again: Vec<Expr> = Vec::new();
        for (b, es) in bases {
            let e = if es.len() == 1 { es.into_iter().next().unwrap() } else { Expr::add_all(es) };
            let p = Expr::pow(&b, &e);
            match p.node() {
                Node::Rational(_) | Node::Float(_) => coeff = coeff.mul(p.as_num().unwrap()),
                Node::Product(_) => again.push(p),
                _ => {
                    // a merged exponent can produce a new power of a base
                    // already present (e.g. (x^2)^(1/2) stays, x*x^(-1) -> 1)
                    if p.is_one() {
                        continue;
                    }
                    out.push(p)
                }
            }
        }
        if !again.is_empty() {
            again.extend(out);
            again.push(Expr::num(coeff));
            return Expr::mul_all(again);
        }
        if coeff.is_zero() {
            return Expr::num(coeff);
        }
        if out.is_empty() {
            return Expr::num(coeff);
        }
        if coeff.is_one() && out.len() == 1 {
            return out.pop().unwrap();
        }
        if !coeff.is_one() && out.len() == 1 {
            if let Node::Sum(terms) = out[0].node() {
                let c = Expr::num(coeff);
                return Expr::add_all(terms.iter().map(|t| Expr::mul_all([c.clone(), t.clone()])));
            }
        }
        out.sort();
        if !coeff.is_one() {
            out.insert(0, Expr::num(coeff));
        }
        Expr::raw(Node::Product(out))
    }

    pub fn pow(base: &Expr, exp: &Expr) -> Expr {
        if exp.is_zero() {
            return Expr::one();
        }
        if exp.is_one() {
            return base.clone();
        }
        if base.is_one() {
            return Expr::one();
        }
        if let (Some(b), Some(e)) = (base.as_num(), exp.as_num()) {
            if b.is_zero() {
                if !e.is_negative() {
                    return Expr::zero();
                }
                return Expr::raw(Node::Power(base.clone(), exp.clone()));
            }
            if let Some(k) = e.as_integer() {
                if let Some(v) = b.powi(k) {
                    return Expr::num(v);
                }
            }
            match (b, e) {
                (Num::Flt(_), _) | (_, Num::Flt(_)) => {
                    let v = b.to_f64().powf(e.to_f64());
                    if v.is_finite() {
                        return Expr::float(v);
                    }
                }
                (Num::Rat(bq), Num::Rat(eq)) => {
                    // perfect powers: 4^(1/2) -> 2, (1/8)^(2/3) -> 1/4
                    if bq.is_positive() {
                        if let (Some(d), Some(p)) = (eq.denom().to_u32(), eq.numer().to_i64()) {
                            if let (Some(rn), Some(rd)) = (num::exact_root(*bq.numer(), d), num::exact_root(*bq.denom(), d)) {
                                if let Some(v) = Num::Rat(Q::new(rn, rd)).powi(p) {
                                    return Expr::num(v);
                                }
                            }
                        }
                    }
                }
            }
            return Expr::raw(Node::Power(base.clone(), exp.clone()));
        }
        let int_exp = exp.as_num().and_then(Num::as_integer);
        match base.node() {
            Node::Power(b, e) if int_exp.is_some() => {
                return Expr::pow(b, &Expr::mul_all([e.clone(), exp.clone()]));
            }
            Node::Product(fs) if int_exp.is_some() => {
                return Expr::mul_all(fs.iter().map(|f| Expr::pow(f, exp)));
            }
            Node::Func(Func::Exp, a) if exp.is_number() => {
                return Expr::func(Func::Exp, &Expr::mul_all([exp.clone(), a.clone()]));
            }
            _ => {}
        }
        if base.is_zero() {
            if exp.as_num().is_some_and(|e| !e.is_negative()) {
                return Expr::zero();
            }
        }
        Expr::raw(Node::Power(base.clone(), exp.clone()))
    }

    pub fn func(f: Func, arg: &Expr) -> Expr {
        if let Some(a) = arg.as_num() {
            match (f, a) {
                (Func::Exp, a) if a.is_zero() => return Expr::one(),
                (Func::Log, a) if a.is_one() => return Expr::zero(),
                (Func::Sin, a) if a.is_zero() => return Expr::zero(),
                (Func::Cos, a) if a.is_zero() => return Expr::one(),
                (_, Num::Flt(v)) => {
                    let r = match f {
                        Func::Exp => v.exp(),
                        Func::Log => v.ln(),
                        Func::Sin => v.sin(),
                        Func::Cos => v.cos(),
                    };
                    if r.is_finite() {
                        return Expr::float(r);
                    }
                }
                _ => {}
            }
        }
        match (f, arg.node()) {
            (Func::Exp, Node::Func(Func::Log, inner)) => return inner.clone(),
            (Func::Log, Node::Func(Func::Exp, inner)) => return inner.clone(),
            _ => {}
        }
        Expr::raw(Node::Func(f, arg.clone()))
    }

    pub fn sqrt(&self) -> Expr {
        Expr::pow(self, &Expr::ratio(1, 2))
    }

    pub fn exp(&self) -> Expr {
        Expr::func(Func::Exp, self)
    }

    pub fn ln(&self) -> Expr {
        Expr::func(Func::Log, self)
    }

    pub fn sin(&self) -> Expr {
        Expr::func(Func::Sin, self)
    }

    pub fn cos(&self) -> Expr {
        Expr::func(Func::Cos, self)
    }

    pub fn powi(&self, k: i64) -> Expr {
        Expr::pow(self, &Expr::int(k))
    }

    pub fn recip(&self) -> Expr {
        self.powi(-1)
    }

    /// Replaces every occurrence of the symbol `name` by `with`.
    pub fn subs(&self, name: &str, with: &Expr) -> Expr {
        let mut cache = std::collections::HashMap::new();
        self.subs_cached(name, with, &mut cache)
    }

    fn subs_cached(&self, name: &str, with: &Expr, cache: &mut std::collections::HashMap<Expr, Expr>) -> Expr {
        if !self.contains_symbol(name) {
            return self.clone();
        }
        if let Some(hit) = cache.get(self) {
            return hit.clone();
        }
        let out = match self.node() {
            Node::Symbol(_) => with.clone(),
            Node::Sum(v) => Expr::add_all(v.iter().map(|e| e.subs_cached(name, with, cache))),
            Node::Product(v) => Expr::mul_all(v.iter().map(|e| e.subs_cached(name, with, cache))),
            Node::Power(b, e) => Expr::pow(&b.subs_cached(name, with, cache), &e.subs_cached(name, with, cache)),
            Node::Func(f, a) => Expr::func(*f, &a.subs_cached(name, with, cache)),
            _ => self.clone(),
        };
        cache.insert(self.clone(), out.clone());
        out
    }

    /// Rational constant as `f64` when the expression is numeric.
    pub fn to_f64(&self) -> Option<f64> {
        self.as_num().map(Num::to_f64)
    }

    pub(crate) fn q_is_negative(q: &Q) -> bool {
        q.is_negative()
    }

    pub(crate) fn q_is_integer(q: &Q) -> bool {
        q.denom().is_one()
    }
}

impl std::ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::add_all([self, rhs])
    }
}
impl std::ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::add_all([self, -rhs])
    }
}
impl std::ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::mul_all([self, rhs])
    }
}
impl std::ops::Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        Expr::mul_all([self, rhs.recip()])
    }
}
impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::mul_all([Expr::int(-1), self])
    }
}
impl std::ops::Add<&Expr> for &Expr {
    type Output = Expr;
    fn add(self, rhs: &Expr) -> Expr {
        Expr::add_all([self.clone(), rhs.clone()])
    }
}
impl std::ops::Sub<&Expr> for &Expr {
    type Output = Expr;
    fn sub(self, rhs: &Expr) -> Expr {
        Expr::add_all([self.clone(), -rhs.clone()])
    }
}
impl std::ops::Mul<&Expr> for &Expr {
    type Output = Expr;
    fn mul(self, rhs: &Expr) -> Expr {
        Expr::mul_all([self.clone(), rhs.clone()])
    }
}
impl std::ops::Div<&Expr> for &Expr {
    type Output = Expr;
    fn div(self, rhs: &Expr) -> Expr {
        Expr::mul_all([self.clone(), rhs.recip()])
    }
}

impl std::str::FromStr for Expr {
    type Err = ParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}
