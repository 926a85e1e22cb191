use std::collections::HashMap;

use super::{Expr, Func, Node};

impl Expr {
    /// Exact partial derivative with respect to the symbol `s`.
    pub fn diff(&self, s: &str) -> Expr {
        let mut memo = HashMap::new();
        d(self, s, &mut memo)
    }
}

fn d(e: &Expr, s: &str, memo: &mut HashMap<Expr, Expr>) -> Expr {
    if !e.contains_symbol(s) {
        return Expr::zero();
    }
    if let Some(hit) = memo.get(e) {
        return hit.clone();
    }
    let out = match e.node() {
        Node::Rational(_) | Node::Float(_) => Expr::zero(),
        Node::Symbol(_) => Expr::one(),
        Node::Sum(terms) => Expr::add_all(terms.iter().map(|t| d(t, s, memo))),
        Node::Product(fs) => {
            let mut terms = Vec::new();
            for i in 0..fs.len() {
                let di = d(&fs[i], s, memo);
                if di.is_zero() {
                    continue;
                }
                let mut prod: Vec<Expr> = Vec::with_capacity(fs.len());
                prod.push(di);
                prod.extend(fs.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, f)| f.clone()));
                terms.push(Expr::mul_all(prod));
            }
            Expr::add_all(terms)
        }
        Node::Power(b, x) => {
            let db = d(b, s, memo);
            if !x.contains_symbol(s) {
                Expr::mul_all([x.clone(), Expr::pow(b, &(x - &Expr::one())), db])
            } else {
                let dx = d(x, s, memo);
                let inner = Expr::add_all([
                    Expr::mul_all([dx, b.ln()]),
                    Expr::mul_all([x.clone(), db, b.recip()]),
                ]);
                Expr::mul_all([e.clone(), inner])
            }
        }
        Node::Func(f, a) => {
            let da = d(a, s, memo);
            let outer = match f {
                Func::Exp => e.clone(),
                Func::Log => a.recip(),
                Func::Sin => a.cos(),
                Func::Cos => -a.sin(),
            };
            Expr::mul_all([outer, da])
        }
    };
    memo.insert(e.clone(), out.clone());
    out
}

#[cfg(test)]
mod tests {
    use crate::expr::{parse, Expr};

    #[test]
    fn basic_rules() {
        let r = Expr::symbol("r");
        assert_eq!(r.powi(2).diff("r"), Expr::int(2) * r.clone());
        assert!(Expr::symbol("c").diff("r").is_zero());
        assert!(Expr::int(7).diff("r").is_zero());
    }

    #[test]
    fn schwarzschild_profile_derivatives() {
        let h = parse("-1/2 + m/r").unwrap();
        assert_eq!(h.diff("r"), parse("-m/r^2").unwrap());
        assert_eq!(h.diff("r").diff("r"), parse("2*m/r^3").unwrap());
    }

    #[test]
    fn variable_exponent() {
        let e = parse("x^x").unwrap();
        assert_eq!(e.diff("x"), parse("x^x*(1 + log(x))").unwrap());
    }
}
