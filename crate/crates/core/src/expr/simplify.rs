use std::collections::HashMap;

use super::{Expr, Node};

const MAX_PASSES: usize = 8;
const EXPAND_TERM_LIMIT: usize = 256;

impl Expr {
    /// Bounded fixed-point simplification.
    ///
    /// Each pass rebuilds the tree bottom-up through the canonical
    /// constructors and distributes products over sums when the expansion
    /// stays small, which is what lets rational cancellations surface.
    pub fn simplify(&self) -> Expr {
        let mut cur = self.clone();
        for _ in 0..MAX_PASSES {
            let mut memo = HashMap::new();
            let next = pass(&cur, &mut memo);
            if next == cur {
                return next;
            }
            cur = next;
        }
        cur
    }

    /// Full distribution of products and non-negative integer powers over sums.
    pub fn expand(&self) -> Expr {
        let mut memo = HashMap::new();
        expand_rec(self, usize::MAX, &mut memo).unwrap_or_else(|| self.clone())
    }
}

fn pass(e: &Expr, memo: &mut HashMap<Expr, Expr>) -> Expr {
    if let Some(hit) = memo.get(e) {
        return hit.clone();
    }
    let rebuilt = match e.node() {
        Node::Sum(ts) => Expr::add_all(ts.iter().map(|t| pass(t, memo))),
        Node::Product(fs) => {
            let p = Expr::mul_all(fs.iter().map(|f| pass(f, memo)));
            let mut m = HashMap::new();
            expand_rec(&p, EXPAND_TERM_LIMIT, &mut m).unwrap_or(p)
        }
        Node::Power(b, x) => {
            let p = Expr::pow(&pass(b, memo), &pass(x, memo));
            let mut m = HashMap::new();
            expand_rec(&p, EXPAND_TERM_LIMIT, &mut m).unwrap_or(p)
        }
        Node::Func(f, a) => Expr::func(*f, &pass(a, memo)),
        _ => e.clone(),
    };
    memo.insert(e.clone(), rebuilt.clone());
    rebuilt
}

fn terms_of(e: &Expr) -> Vec<Expr> {
    match e.node() {
        Node::Sum(ts) => ts.clone(),
        _ => vec![e.clone()],
    }
}

/// Expands `e`; `None` when the result would exceed `limit` terms.
fn expand_rec(e: &Expr, limit: usize, memo: &mut HashMap<Expr, Option<Expr>>) -> Option<Expr> {
    if let Some(hit) = memo.get(e) {
        return hit.clone();
    }
    let out = match e.node() {
        Node::Sum(ts) => {
            let mut parts = Vec::with_capacity(ts.len());
            for t in ts {
                parts.push(expand_rec(t, limit, memo)?);
            }
            Some(Expr::add_all(parts))
        }
        Node::Product(fs) => {
            let mut acc: Vec<Expr> = vec![Expr::one()];
            for f in fs {
                let fe = expand_rec(f, limit, memo)?;
                let ft = terms_of(&fe);
                if acc.len().saturating_mul(ft.len()) > limit {
                    return None;
                }
                let mut next = Vec::with_capacity(acc.len() * ft.len());
                for a in &acc {
                    for t in &ft {
                        next.push(Expr::mul_all([a.clone(), t.clone()]));
                    }
                }
                acc = next;
            }
            Some(Expr::add_all(acc))
        }
        Node::Power(b, x) => match x.as_rational().filter(|q| Expr::q_is_integer(q) && !Expr::q_is_negative(q)) {
            Some(q) if matches!(b.node(), Node::Sum(_)) => {
                let k = *q.numer();
                let be = expand_rec(b, limit, memo)?;
                let bt = terms_of(&be);
                if (bt.len() as f64).powi(k.min(64) as i32) > limit as f64 {
                    return None;
                }
                let mut acc = vec![Expr::one()];
                for _ in 0..k {
                    let mut next = Vec::new();
                    for a in &acc {
                        for t in &bt {
                            next.push(Expr::mul_all([a.clone(), t.clone()]));
                        }
                    }
                    acc = terms_of(&Expr::add_all(next));
                }
                Some(Expr::add_all(acc))
            }
            _ => Some(e.clone()),
        },
        _ => Some(e.clone()),
    };
    memo.insert(e.clone(), out.clone());
    out
}

#[cfg(test)]
mod tests {
    use crate::expr::{parse, Expr};

    #[test]
    fn textbook_cases() {
        assert_eq!(parse("x + x").unwrap().simplify(), parse("2*x").unwrap());
        assert!(parse("r^2 * r^(-2)").unwrap().simplify().is_one());
    }

    #[test]
    fn psi_numerator_for_schwarzschild() {
        let h = parse("-1/2 + m/r").unwrap();
        let r = Expr::symbol("r");
        let e = (Expr::one() + Expr::int(2) * h.clone()) / r.powi(2) - Expr::int(2) * h.diff("r") / r.clone()
            + h.diff("r").diff("r");
        assert_eq!(e.simplify(), parse("6*m/r^3").unwrap());
    }

    #[test]
    fn expansion_cancels() {
        let e = parse("(a+b)^2 - a^2 - 2*a*b - b^2").unwrap();
        assert!(e.simplify().is_zero());
    }

    #[test]
    fn idempotent() {
        let e = parse("(x+1)*(x-1)/(x^2-1) + exp(log(y))").unwrap();
        let s = e.simplify();
        assert_eq!(s.simplify(), s);
    }
}
