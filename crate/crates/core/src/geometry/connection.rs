use crate::scalar::Scalar;

use super::tensor::{multi_indices, permutations};
use super::{GeometryError, Slot, Tensor};

/// A metric with its inverse and Christoffel symbols `Γ^a_bc`
/// (slots `[Up, Down, Down]`).
#[derive(Clone, Debug)]
pub struct LeviCivita<S: Scalar> {
    pub ctx: S::Ctx,
    pub dim: usize,
    pub g: Tensor<S>,
    pub ginv: Tensor<S>,
    pub gamma: Tensor<S>,
}

impl<S: Scalar> LeviCivita<S> {
    pub fn new(ctx: S::Ctx, g: Tensor<S>) -> Result<LeviCivita<S>, GeometryError> {
        let n = g.dim;
        let rows: Vec<Vec<S>> = (0..n).map(|i| (0..n).map(|j| g.get(&[i, j]).clone()).collect()).collect();
        let inv = S::invert(&ctx, &rows).ok_or_else(|| GeometryError::SingularMetric("expansion point".into()))?;
        let ginv = Tensor::from_fn(n, vec![Slot::Up, Slot::Up], -2, |i| inv[i[0]][i[1]].clone());
        let dg = g.partial(&ctx);
        let first = Tensor::from_fn(n, vec![Slot::Down, Slot::Down, Slot::Down], 0, |i| {
            let (d, b, c) = (i[0], i[1], i[2]);
            dg.get(&[b, d, c]).add(dg.get(&[c, d, b])).sub(dg.get(&[d, b, c])).scale(&ctx, 0.5)
        });
        let gamma = Tensor::from_fn(n, vec![Slot::Up, Slot::Down, Slot::Down], 0, |i| {
            let mut acc = S::constant(&ctx, 0.0);
            for d in 0..n {
                let gi = ginv.get(&[i[0], d]);
                if gi.is_zero() {
                    continue;
                }
                let f = first.get(&[d, i[1], i[2]]);
                if !f.is_zero() {
                    acc = acc.add(&gi.mul(f));
                }
            }
            acc
        });
        Ok(LeviCivita { ctx, dim: n, g, ginv, gamma })
    }

    /// Same metric with replaced connection coefficients.
    pub fn with_gamma(&self, gamma: Tensor<S>) -> LeviCivita<S> {
        LeviCivita { gamma, ..self.clone() }
    }

    pub fn zero(&self) -> S {
        S::constant(&self.ctx, 0.0)
    }

    /// Contracts slot `slot` of `t` with one index of `m`, a rank-2 tensor
    /// whose second slot is summed; the result keeps `slot` in place with
    /// the variance of `m`'s first slot.
    fn apply(&self, t: &Tensor<S>, slot: usize, m: &Tensor<S>, weight: i32) -> Tensor<S> {
        let n = self.dim;
        let mut slots = t.slots.clone();
        slots[slot] = m.slots[0];
        let mut src = vec![0usize; t.rank()];
        Tensor::from_fn(n, slots, t.weight + weight, |idx| {
            src.copy_from_slice(idx);
            let mut acc = self.zero();
            for e in 0..n {
                let c = m.get(&[idx[slot], e]);
                if c.is_zero() {
                    continue;
                }
                src[slot] = e;
                let v = t.get(&src);
                if !v.is_zero() {
                    acc = acc.add(&c.mul(v));
                }
            }
            acc
        })
    }

    pub fn raise(&self, t: &Tensor<S>, slot: usize) -> Result<Tensor<S>, GeometryError> {
        if slot >= t.rank() {
            return Err(GeometryError::SlotOutOfRange { slot, rank: t.rank() });
        }
        if t.slots[slot] != Slot::Down {
            return Err(GeometryError::VarianceMismatch);
        }
        Ok(self.apply(t, slot, &self.ginv, -2))
    }

    pub fn lower(&self, t: &Tensor<S>, slot: usize) -> Result<Tensor<S>, GeometryError> {
        if slot >= t.rank() {
            return Err(GeometryError::SlotOutOfRange { slot, rank: t.rank() });
        }
        if t.slots[slot] != Slot::Up {
            return Err(GeometryError::VarianceMismatch);
        }
        Ok(self.apply(t, slot, &self.g, 2))
    }

    /// Moves every slot to the requested variance.
    pub fn with_slots(&self, t: &Tensor<S>, want: &[Slot]) -> Result<Tensor<S>, GeometryError> {
        let mut out = t.clone();
        for (k, &s) in want.iter().enumerate() {
            if out.slots[k] != s {
                out = match s {
                    Slot::Up => self.raise(&out, k)?,
                    Slot::Down => self.lower(&out, k)?,
                };
            }
        }
        Ok(out)
    }

    /// `∇_a T`, the derivative index becoming the new leftmost slot.
    pub fn nabla(&self, t: &Tensor<S>) -> Tensor<S> {
        let n = self.dim;
        let d = t.partial(&self.ctx);
        let r = t.rank();
        let mut src = vec![0usize; r];
        let mut out = d;
        for (pos, idx) in multi_indices(n, r + 1).enumerate() {
            let a = idx[0];
            let rest = &idx[1..];
            let mut acc = out.data[pos].clone();
            for k in 0..r {
                src.copy_from_slice(rest);
                for e in 0..n {
                    let (coef, neg) = match t.slots[k] {
                        Slot::Up => (self.gamma.get(&[rest[k], a, e]), false),
                        Slot::Down => (self.gamma.get(&[e, a, rest[k]]), true),
                    };
                    if coef.is_zero() {
                        continue;
                    }
                    src[k] = e;
                    let v = t.get(&src);
                    if v.is_zero() {
                        continue;
                    }
                    let term = coef.mul(v);
                    acc = if neg { acc.sub(&term) } else { acc.add(&term) };
                }
            }
            out.data[pos] = acc;
        }
        out
    }

    /// Metric trace over two lower slots.
    pub fn trace(&self, t: &Tensor<S>, i: usize, j: usize) -> Result<Tensor<S>, GeometryError> {
        let raised = self.raise(t, i)?;
        raised.contract(&self.ctx, i, j)
    }

    /// Trace-free part of a (0,2) tensor.
    pub fn trace_free(&self, t: &Tensor<S>) -> Tensor<S> {
        let tr = self.trace(t, 0, 1).expect("rank-2 covariant tensor").data[0].clone();
        let c = tr.scale(&self.ctx, 1.0 / self.dim as f64);
        Tensor::from_fn(self.dim, t.slots.clone(), t.weight, |i| t.get(i).sub(&self.g.get(i).mul(&c)))
    }

    /// `ε_{a1…an} = orientation · sqrt|det g| · sign`; the sign of det g
    /// must be numerically known.
    pub fn epsilon(&self, orientation: i32) -> Result<Tensor<S>, GeometryError> {
        let n = self.dim;
        let rows: Vec<Vec<S>> = (0..n).map(|i| (0..n).map(|j| self.g.get(&[i, j]).clone()).collect()).collect();
        let det = S::det(&self.ctx, &rows);
        let sign = det.approx().ok_or(GeometryError::UnknownSign)?;
        if sign == 0.0 {
            return Err(GeometryError::SingularMetric("expansion point".into()));
        }
        let vol = if sign < 0.0 { det.neg() } else { det }.sqrt();
        let vol = if orientation < 0 { vol.neg() } else { vol };
        let mut out = Tensor::zeros(&self.ctx, n, vec![Slot::Down; n], n as i32);
        for (p, s) in permutations(n) {
            out.set(&p, if s > 0 { vol.clone() } else { vol.neg() });
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, Expr};
    use crate::jet::{Jet, JetSpace};
    use crate::scalar::Coords;
    use std::sync::Arc;

    fn sym_metric(coords: &[&str], g: &[&[&str]]) -> (Coords, Tensor<Expr>) {
        let ctx: Coords = Arc::new(coords.iter().map(|s| s.to_string()).collect());
        let n = coords.len();
        let t = Tensor::from_fn(n, vec![Slot::Down, Slot::Down], 2, |i| parse(g[i[0]][i[1]]).unwrap());
        (ctx, t)
    }

    #[test]
    fn flat_christoffels_vanish() {
        let (ctx, g) = sym_metric(&["x", "y", "z"], &[&["1", "0", "0"], &["0", "1", "0"], &["0", "0", "1"]]);
        let lc = LeviCivita::new(ctx, g).unwrap();
        assert!(lc.gamma.data.iter().all(Expr::is_zero));
    }

    #[test]
    fn metricity_symbolic() {
        let (ctx, g) = sym_metric(&["r", "t", "p"], &[&["1", "0", "0"], &["0", "r^2", "0"], &["0", "0", "r^2*sin(t)^2"]]);
        let lc = LeviCivita::new(ctx, g.clone()).unwrap();
        let ng = lc.nabla(&g);
        assert!(ng.data.iter().all(|e| e.simplify().is_zero()), "{:?}", ng.data);
        assert!(lc.gamma.get(&[0, 1, 1]).simplify() == parse("-r").unwrap());
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    assert_eq!(lc.gamma.get(&[a, b, c]), lc.gamma.get(&[a, c, b]));
                }
            }
        }
    }

    fn jet_metric(p: [f64; 3]) -> LeviCivita<Jet> {
        let s = JetSpace::get(3, 3);
        let x: Vec<Jet> = (0..3).map(|i| Jet::variable(&s, i, p[i])).collect();
        let one = Jet::constant(&s, 1.0);
        let g = Tensor::from_fn(3, vec![Slot::Down, Slot::Down], 2, |i| match (i[0], i[1]) {
            (0, 0) => one.add(&x[1].mul(&x[1])),
            (1, 1) => x[0].exp(),
            (2, 2) => one.add(&x[0].mul(&x[2])).scale(2.0),
            (0, 1) | (1, 0) => x[2].scale(0.3),
            _ => Jet::constant(&s, 0.0),
        });
        LeviCivita::new(s, g).unwrap()
    }

    #[test]
    fn metricity_and_round_trip_numeric() {
        let lc = jet_metric([0.4, 0.7, 0.2]);
        let ng = lc.nabla(&lc.g).values();
        assert!(ng.max_abs() < 1e-12);
        let s = lc.ctx.clone();
        let t = Tensor::from_fn(3, vec![Slot::Down, Slot::Up], 0, |i| Jet::constant(&s, (i[0] * 3 + i[1]) as f64 - 2.5));
        let back = lc.lower(&lc.raise(&t, 0).unwrap(), 0).unwrap();
        assert!(back.sub(&t).values().max_abs() < 1e-12);
        assert_eq!(lc.raise(&t, 0).unwrap().weight, -2);
        assert!(matches!(lc.raise(&t, 1), Err(GeometryError::VarianceMismatch)));
        assert!(matches!(lc.raise(&t, 5), Err(GeometryError::SlotOutOfRange { .. })));
    }

    #[test]
    fn leibniz_rule() {
        let lc = jet_metric([0.1, -0.3, 0.5]);
        let s = lc.ctx.clone();
        let x: Vec<Jet> = (0..3).map(|i| Jet::variable(&s, i, [0.1, -0.3, 0.5][i])).collect();
        let u = Tensor::from_fn(3, vec![Slot::Up], 0, |i| x[i[0]].mul(&x[(i[0] + 1) % 3]).add(&Jet::constant(&s, 1.0)));
        let w = Tensor::from_fn(3, vec![Slot::Down], 0, |i| x[i[0]].exp());
        let lhs = lc.nabla(&u.outer(&w));
        let rhs = lc.nabla(&u).outer(&w).add(&u.outer(&lc.nabla(&w)).permute(&[1, 0, 2]));
        assert!(lhs.sub(&rhs).values().max_abs() < 1e-12);
    }

    #[test]
    fn epsilon_scaling_and_norm() {
        let (ctx, g) = sym_metric(&["x", "y", "z"], &[&["4", "0", "0"], &["0", "4", "0"], &["0", "0", "1"]]);
        let lc = LeviCivita::new(ctx, g).unwrap();
        let e = lc.epsilon(1).unwrap();
        assert_eq!(e.get(&[0, 1, 2]).to_f64(), Some(4.0));
        let lc = jet_metric([0.4, 0.7, 0.2]);
        let e = lc.epsilon(-1).unwrap();
        let mut up = e.clone();
        for k in 0..3 {
            up = lc.raise(&up, k).unwrap();
        }
        let full = e.outer(&up);
        let c = full.contract(&lc.ctx, 0, 3).unwrap().contract(&lc.ctx, 0, 2).unwrap().contract(&lc.ctx, 0, 1).unwrap();
        assert!((c.data[0].value() - 6.0).abs() < 1e-9);
    }
}
