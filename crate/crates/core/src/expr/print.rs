use std::fmt;

use super::num::format_float;
use super::{Expr, Node, Num, Q};
use num_traits::{One, Signed};

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render(self))
    }
}

pub(crate) fn render(e: &Expr) -> String {
    match e.node() {
        Node::Sum(terms) => {
            let mut s = render_term(&terms[0]);
            for t in &terms[1..] {
                if t.has_negative_coeff() {
                    s.push_str(" - ");
                    s.push_str(&render_term(&-t.clone()));
                } else {
                    s.push_str(" + ");
                    s.push_str(&render_term(t));
                }
            }
            s
        }
        _ => render_term(e),
    }
}

fn render_rational(q: &Q) -> String {
    if q.denom().is_one() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

fn render_term(e: &Expr) -> String {
    match e.node() {
        Node::Rational(q) => render_rational(q),
        Node::Float(v) => format_float(v.0),
        Node::Symbol(s) => s.to_string(),
        Node::Func(fun, a) => format!("{}({})", fun.name(), render(a)),
        Node::Sum(_) => render(e),
        Node::Product(_) | Node::Power(_, _) => render_product(e),
    }
}

fn render_product(e: &Expr) -> String {
    let (coeff, factors): (Num, Vec<Expr>) = match e.node() {
        Node::Product(fs) => match fs[0].as_num() {
            Some(c) => (c, fs[1..].to_vec()),
            None => (Num::one(), fs.clone()),
        },
        _ => (Num::one(), vec![e.clone()]),
    };
    let mut num_parts: Vec<String> = Vec::new();
    let mut den_parts: Vec<String> = Vec::new();
    let mut den_coeff = None;
    let mut den_sum = false;
    let mut sign = "";
    match coeff {
        Num::Rat(q) => {
            let a = q.abs();
            if q.is_negative() {
                sign = "-";
            }
            if !a.numer().is_one() {
                num_parts.push(a.numer().to_string());
            }
            if !a.denom().is_one() {
                den_coeff = Some(a.denom().to_string());
            }
        }
        Num::Flt(v) => num_parts.push(format_float(v)),
    }
    for f in &factors {
        let (b, x) = match f.node() {
            Node::Power(b, x) => (b.clone(), x.clone()),
            _ => (f.clone(), Expr::one()),
        };
        // 0^-k stays in the numerator; a literal 0 in a denominator would fold away
        if x.has_negative_coeff() && !b.is_zero() {
            den_sum = matches!(b.node(), Node::Sum(_)) && x == -Expr::one();
            den_parts.push(render_power(&b, &-x));
        } else {
            num_parts.push(render_power(&b, &x));
        }
    }
    let mut s = String::from(sign);
    if num_parts.is_empty() {
        s.push('1');
    } else {
        s.push_str(&num_parts.join("*"));
    }
    // `2*(a + b)` would reparse as `2*a + 2*b`, so a lone sum is divided separately
    let lone_sum = den_parts.len() == 1 && den_sum;
    if let Some(d) = den_coeff {
        if lone_sum {
            s.push('/');
            s.push_str(&d);
        } else {
            den_parts.insert(0, d);
        }
    }
    match den_parts.len() {
        0 => {}
        1 => {
            s.push('/');
            s.push_str(&den_parts[0]);
        }
        _ => {
            s.push_str("/(");
            s.push_str(&den_parts.join("*"));
            s.push(')');
        }
    }
    s
}

fn render_power(base: &Expr, exp: &Expr) -> String {
    let b = render_base(base);
    if exp.is_one() {
        return b;
    }
    let x = match exp.as_rational() {
        Some(q) if q.denom().is_one() && !q.is_negative() => q.numer().to_string(),
        _ => format!("({})", render(exp)),
    };
    format!("{b}^{x}")
}

/// A factor in a product: sums are parenthesized, powers of compound bases too.
fn render_base(base: &Expr) -> String {
    match base.node() {
        Node::Symbol(s) => s.to_string(),
        Node::Func(..) => render_term(base),
        Node::Rational(q) if q.denom().is_one() && !q.is_negative() => render_rational(q),
        Node::Float(v) if v.0 >= 0.0 => format_float(v.0),
        _ => format!("({})", render(base)),
    }
}
