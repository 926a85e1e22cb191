use std::collections::HashMap;

use super::eval::{domain, format_point, Bindings, EvalError, Value};
use super::{Expr, Func, Node};

#[derive(Clone, Debug, PartialEq)]
pub enum Instr {
    Const(f64),
    Input(usize),
    Add(usize, usize),
    Mul(usize, usize),
    Neg(usize),
    Recip(usize),
    PowI(usize, i32),
    PowF(usize, f64),
    Pow(usize, usize),
    Exp(usize),
    Log(usize),
    Sin(usize),
    Cos(usize),
    Sqrt(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum Key {
    Const(u64),
    Input(usize),
    Bin(u8, usize, usize),
    Un(u8, usize),
    PowI(usize, i32),
    PowF(usize, u64),
}

/// A flat single-assignment instruction tape with one output slot per
/// compiled expression.
#[derive(Clone, Debug)]
pub struct EvalProgram {
    instrs: Vec<Instr>,
    inputs: Vec<String>,
    outputs: Vec<usize>,
}

struct Builder<'a> {
    instrs: Vec<Instr>,
    keys: HashMap<Key, usize>,
    exprs: HashMap<Expr, usize>,
    inputs: &'a [String],
}

impl Builder<'_> {
    fn emit(&mut self, ins: Instr) -> usize {
        let key = match &ins {
            Instr::Const(v) => Key::Const(v.to_bits()),
            Instr::Input(i) => Key::Input(*i),
            Instr::Add(a, b) => Key::Bin(0, *a.min(b), *a.max(b)),
            Instr::Mul(a, b) => Key::Bin(1, *a.min(b), *a.max(b)),
            Instr::Pow(a, b) => Key::Bin(2, *a, *b),
            Instr::Neg(a) => Key::Un(0, *a),
            Instr::Recip(a) => Key::Un(1, *a),
            Instr::Exp(a) => Key::Un(2, *a),
            Instr::Log(a) => Key::Un(3, *a),
            Instr::Sin(a) => Key::Un(4, *a),
            Instr::Cos(a) => Key::Un(5, *a),
            Instr::Sqrt(a) => Key::Un(6, *a),
            Instr::PowI(a, k) => Key::PowI(*a, *k),
            Instr::PowF(a, k) => Key::PowF(*a, k.to_bits()),
        };
        if let Some(&s) = self.keys.get(&key) {
            return s;
        }
        self.instrs.push(ins);
        let s = self.instrs.len() - 1;
        self.keys.insert(key, s);
        s
    }

    fn product(&mut self, slots: Vec<usize>) -> Option<usize> {
        let mut it = slots.into_iter();
        let first = it.next()?;
        Some(it.fold(first, |acc, s| self.emit(Instr::Mul(acc, s))))
    }

    /// `b^k` for a positive numeric exponent.
    fn power(&mut self, b: usize, k: f64) -> usize {
        if k == 1.0 {
            b
        } else if k.fract() == 0.0 && k.abs() < i32::MAX as f64 {
            self.emit(Instr::PowI(b, k as i32))
        } else if k == 0.5 {
            self.emit(Instr::Sqrt(b))
        } else {
            self.emit(Instr::PowF(b, k))
        }
    }

    fn go(&mut self, e: &Expr) -> Result<usize, EvalError> {
        if let Some(&s) = self.exprs.get(e) {
            return Ok(s);
        }
        let s = match e.node() {
            Node::Rational(_) | Node::Float(_) => self.emit(Instr::Const(e.to_f64().unwrap())),
            Node::Symbol(name) => {
                let i = self
                    .inputs
                    .iter()
                    .position(|n| n.as_str() == &**name)
                    .ok_or_else(|| EvalError::Unbound(name.to_string()))?;
                self.emit(Instr::Input(i))
            }
            Node::Sum(ts) => {
                let mut acc = self.go(&ts[0])?;
                for t in &ts[1..] {
                    let s = self.go(t)?;
                    acc = self.emit(Instr::Add(acc, s));
                }
                acc
            }
            Node::Product(_) | Node::Power(_, _) => {
                let factors: Vec<Expr> = match e.node() {
                    Node::Product(fs) => fs.clone(),
                    _ => vec![e.clone()],
                };
                let mut num = Vec::new();
                let mut den = Vec::new();
                let mut negate = false;
                for f in &factors {
                    if let Some(c) = f.to_f64() {
                        if c == -1.0 {
                            negate = true;
                        } else {
                            num.push(self.emit(Instr::Const(c)));
                        }
                        continue;
                    }
                    match f.node() {
                        Node::Power(b, x) => {
                            let bs = self.go(b)?;
                            match x.to_f64() {
                                Some(k) if k < 0.0 => den.push(self.power(bs, -k)),
                                Some(k) => num.push(self.power(bs, k)),
                                None => {
                                    let xs = self.go(x)?;
                                    num.push(self.emit(Instr::Pow(bs, xs)));
                                }
                            }
                        }
                        _ => num.push(self.go(f)?),
                    }
                }
                let mut out = match (self.product(num), self.product(den)) {
                    (Some(n), Some(d)) => {
                        let r = self.emit(Instr::Recip(d));
                        self.emit(Instr::Mul(n, r))
                    }
                    (Some(n), None) => n,
                    (None, Some(d)) => self.emit(Instr::Recip(d)),
                    (None, None) => self.emit(Instr::Const(1.0)),
                };
                if negate {
                    out = self.emit(Instr::Neg(out));
                }
                out
            }
            Node::Func(f, a) => {
                let s = self.go(a)?;
                self.emit(match f {
                    Func::Exp => Instr::Exp(s),
                    Func::Log => Instr::Log(s),
                    Func::Sin => Instr::Sin(s),
                    Func::Cos => Instr::Cos(s),
                })
            }
        };
        self.exprs.insert(e.clone(), s);
        Ok(s)
    }
}

impl EvalProgram {
    /// Compiles one expression; inputs are its free symbols in sorted order.
    pub fn compile(e: &Expr) -> EvalProgram {
        let inputs: Vec<String> = e.free_symbols().into_iter().collect();
        Self::compile_many(std::slice::from_ref(e), &inputs).expect("all free symbols are inputs")
    }

    /// Compiles a batch over a fixed input order, sharing common
    /// subexpressions across the whole batch.
    pub fn compile_many(exprs: &[Expr], inputs: &[String]) -> Result<EvalProgram, EvalError> {
        let mut b = Builder { instrs: Vec::new(), keys: HashMap::new(), exprs: HashMap::new(), inputs };
        let mut outputs = Vec::with_capacity(exprs.len());
        for e in exprs {
            outputs.push(b.go(e)?);
        }
        Ok(EvalProgram { instrs: b.instrs, inputs: inputs.to_vec(), outputs })
    }

    pub fn inputs(&self) -> &[String] {
        &self.inputs
    }

    pub fn len(&self) -> usize {
        self.instrs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instrs.is_empty()
    }

    pub fn n_outputs(&self) -> usize {
        self.outputs.len()
    }

    pub fn instructions(&self) -> &[Instr] {
        &self.instrs
    }

    /// Runs the tape on values of any [`Value`] type.
    pub fn run<V: Value>(&self, ctx: &V::Ctx, inputs: &[V]) -> Result<Vec<V>, EvalError> {
        assert_eq!(inputs.len(), self.inputs.len(), "input arity mismatch");
        let mut slots: Vec<V> = Vec::with_capacity(self.instrs.len());
        let fail = |op: &'static str| EvalError::Domain {
            op,
            point: format_point(&self.inputs, &inputs.iter().map(V::re).collect::<Vec<_>>()),
        };
        for ins in &self.instrs {
            let v = match *ins {
                Instr::Const(c) => V::lift(ctx, c),
                Instr::Input(i) => inputs[i].clone(),
                Instr::Add(a, b) => slots[a].add(&slots[b]),
                Instr::Mul(a, b) => slots[a].mul(&slots[b]),
                Instr::Neg(a) => slots[a].neg(),
                Instr::Recip(a) => {
                    if !domain::recip_ok(slots[a].re()) {
                        return Err(fail("division"));
                    }
                    slots[a].recip()
                }
                Instr::PowI(a, k) => {
                    if !domain::powf_ok(slots[a].re(), k as f64) {
                        return Err(fail("division"));
                    }
                    slots[a].powi(k)
                }
                Instr::PowF(a, k) => {
                    if !domain::powf_ok(slots[a].re(), k) {
                        return Err(fail("fractional power"));
                    }
                    slots[a].powf(k)
                }
                Instr::Sqrt(a) => {
                    if slots[a].re() < 0.0 {
                        return Err(fail("sqrt"));
                    }
                    slots[a].sqrt()
                }
                Instr::Pow(a, b) => {
                    if !domain::log_ok(slots[a].re()) {
                        return Err(fail("power"));
                    }
                    slots[a].pow(&slots[b])
                }
                Instr::Exp(a) => slots[a].exp(),
                Instr::Log(a) => {
                    if !domain::log_ok(slots[a].re()) {
                        return Err(fail("log"));
                    }
                    slots[a].ln()
                }
                Instr::Sin(a) => slots[a].sin(),
                Instr::Cos(a) => slots[a].cos(),
            };
            slots.push(v);
        }
        Ok(self.outputs.iter().map(|&s| slots[s].clone()).collect())
    }

    pub fn eval_many(&self, b: &Bindings) -> Result<Vec<f64>, EvalError> {
        let mut vals = Vec::with_capacity(self.inputs.len());
        for name in &self.inputs {
            vals.push(*b.get(name).ok_or_else(|| EvalError::Unbound(name.clone()))?);
        }
        self.run(&(), &vals)
    }

    /// First output evaluated at `b`.
    pub fn eval(&self, b: &Bindings) -> Result<f64, EvalError> {
        Ok(self.eval_many(b)?[0])
    }
}
