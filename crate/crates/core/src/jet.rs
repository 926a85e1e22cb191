//! Truncated multivariate Taylor series.
//!
//! A [`Jet`] of order `k` in `n` variables stores the coefficients
//! `c_α = ∂^α f(p) / α!` for all multi-indices with `|α| ≤ k`. Products
//! truncate to the smaller order of the operands and every partial
//! derivative lowers the order by one, so the order of a result says how
//! many derivatives of it are still exact.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::expr::Value;

#[derive(Debug)]
pub struct JetSpace {
    n: usize,
    max_order: usize,
    monos: Vec<Vec<u8>>,
    /// `count[k]` = number of monomials of degree ≤ k.
    count: Vec<usize>,
    /// `(i, j, target)` with deg i + deg j = deg target, sorted by target degree.
    pairs: Vec<(u32, u32, u32)>,
    /// `pair_count[k]` = number of pairs whose degree sum is ≤ k.
    pair_count: Vec<usize>,
    /// Per variable: `(source, target, factor)` for `∂_i`.
    deriv: Vec<Vec<(u32, u32, f64)>>,
}

impl JetSpace {
    fn build(n: usize, max_order: usize) -> JetSpace {
        let mut monos: Vec<Vec<u8>> = vec![vec![0; n]];
        let mut count = vec![1];
        let mut layer: Vec<Vec<u8>> = vec![vec![0; n]];
        for _ in 1..=max_order {
            let mut next: Vec<Vec<u8>> = Vec::new();
            for m in &layer {
                // extend only at or after the last nonzero slot to avoid duplicates
                let last = m.iter().rposition(|&a| a > 0).unwrap_or(0);
                for i in last..n {
                    let mut m2 = m.clone();
                    m2[i] += 1;
                    next.push(m2);
                }
            }
            monos.extend(next.iter().cloned());
            count.push(monos.len());
            layer = next;
        }
        let index: HashMap<Vec<u8>, usize> = monos.iter().cloned().enumerate().map(|(i, m)| (m, i)).collect();
        let deg = |m: &Vec<u8>| m.iter().map(|&a| a as usize).sum::<usize>();
        let mut pairs = Vec::new();
        for (i, a) in monos.iter().enumerate() {
            for (j, b) in monos.iter().enumerate() {
                if deg(a) + deg(b) > max_order {
                    continue;
                }
                let s: Vec<u8> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                pairs.push((i as u32, j as u32, index[&s] as u32, deg(a) + deg(b)));
            }
        }
        pairs.sort_by_key(|p| (p.3, p.2, p.0, p.1));
        let pair_count = (0..=max_order).map(|k| pairs.iter().filter(|p| p.3 <= k).count()).collect();
        let pairs = pairs.into_iter().map(|(i, j, t, _)| (i, j, t)).collect();
        let mut deriv = vec![Vec::new(); n];
        for (k, m) in monos.iter().enumerate() {
            for (i, d) in deriv.iter_mut().enumerate() {
                if m[i] > 0 {
                    let mut t = m.clone();
                    t[i] -= 1;
                    d.push((k as u32, index[&t] as u32, m[i] as f64));
                }
            }
        }
        JetSpace { n, max_order, monos, count, pairs, pair_count, deriv }
    }

    /// Shared space for `n` variables up to `max_order`.
    pub fn get(n: usize, max_order: usize) -> Arc<JetSpace> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<JetSpace>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().unwrap();
        guard.entry((n, max_order)).or_insert_with(|| Arc::new(JetSpace::build(n, max_order))).clone()
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn len(&self, order: i32) -> usize {
        if order < 0 {
            0
        } else {
            self.count[order as usize]
        }
    }

    pub fn monomial(&self, k: usize) -> &[u8] {
        &self.monos[k]
    }

    pub fn index_of(&self, alpha: &[u8]) -> Option<usize> {
        self.monos.iter().position(|m| m.as_slice() == alpha)
    }
}

#[derive(Clone, Debug)]
pub struct Jet {
    space: Arc<JetSpace>,
    order: i32,
    c: Vec<f64>,
}

impl Jet {
    pub fn constant(space: &Arc<JetSpace>, v: f64) -> Jet {
        let order = space.max_order as i32;
        let mut c = vec![0.0; space.len(order)];
        c[0] = v;
        Jet { space: space.clone(), order, c }
    }

    /// The coordinate function `x_i` expanded at a point where it equals `v`.
    pub fn variable(space: &Arc<JetSpace>, i: usize, v: f64) -> Jet {
        let mut j = Jet::constant(space, v);
        if space.max_order >= 1 {
            j.c[1 + i] = 1.0;
        }
        j
    }

    /// Jet from raw coefficients in the space's monomial order.
    pub fn from_coeffs(space: &Arc<JetSpace>, order: i32, c: Vec<f64>) -> Jet {
        assert!(order <= space.max_order as i32);
        assert_eq!(c.len(), space.len(order), "coefficient count");
        Jet { space: space.clone(), order, c }
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    pub fn order(&self) -> i32 {
        self.order
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.c
    }

    /// Value at the expansion point. Panics when all derivative information
    /// has been used up.
    pub fn value(&self) -> f64 {
        assert!(self.order >= 0, "jet exhausted: derivative order exceeded");
        self.c[0]
    }

    /// Coefficient `c_α`; zero outside the stored range.
    pub fn coeff(&self, alpha: &[u8]) -> f64 {
        match self.space.index_of(alpha) {
            Some(k) if k < self.c.len() => self.c[k],
            _ => 0.0,
        }
    }

    /// The partial derivative `∂^α f` at the expansion point.
    pub fn derivative(&self, alpha: &[u8]) -> f64 {
        let fact: f64 = alpha.iter().map(|&a| (1..=a as u64).product::<u64>() as f64).product();
        self.coeff(alpha) * fact
    }

    pub fn truncate(&self, order: i32) -> Jet {
        if order >= self.order {
            return self.clone();
        }
        let len = self.space.len(order);
        Jet { space: self.space.clone(), order, c: self.c[..len].to_vec() }
    }

    pub fn partial(&self, i: usize) -> Jet {
        let order = self.order - 1;
        let len = self.space.len(order);
        let mut c = vec![0.0; len];
        for &(src, dst, f) in &self.space.deriv[i] {
            let (src, dst) = (src as usize, dst as usize);
            if dst < len && src < self.c.len() {
                c[dst] += f * self.c[src];
            }
        }
        Jet { space: self.space.clone(), order, c }
    }

    fn zip(&self, o: &Jet, f: impl Fn(f64, f64) -> f64) -> Jet {
        let order = self.order.min(o.order);
        let len = self.space.len(order);
        let c = (0..len).map(|k| f(self.c[k], o.c[k])).collect();
        Jet { space: self.space.clone(), order, c }
    }

    pub fn add(&self, o: &Jet) -> Jet {
        self.zip(o, |a, b| a + b)
    }

    pub fn sub(&self, o: &Jet) -> Jet {
        self.zip(o, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet { space: self.space.clone(), order: self.order, c: self.c.iter().map(|v| v * s).collect() }
    }

    pub fn mul(&self, o: &Jet) -> Jet {
        let order = self.order.min(o.order);
        if order < 0 {
            return Jet { space: self.space.clone(), order, c: Vec::new() };
        }
        let len = self.space.len(order);
        let mut c = vec![0.0; len];
        let np = self.space.pair_count[order as usize];
        for &(i, j, t) in &self.space.pairs[..np] {
            c[t as usize] += self.c[i as usize] * o.c[j as usize];
        }
        Jet { space: self.space.clone(), order, c }
    }

    /// `Σ d_k (self - self_0)^k` given the Taylor coefficients `d_k` of a
    /// univariate function at the constant term.
    fn compose(&self, d: &[f64]) -> Jet {
        let mut h = self.clone();
        if h.order < 0 {
            return h;
        }
        h.c[0] = 0.0;
        let top = (self.order as usize).min(d.len() - 1);
        let mut acc = Jet::constant(&self.space, d[top]).truncate(self.order);
        for k in (0..top).rev() {
            acc = acc.mul(&h);
            acc.c[0] += d[k];
        }
        acc
    }

    fn taylor_len(&self) -> usize {
        self.order.max(0) as usize + 1
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        let mut d = vec![e; self.taylor_len()];
        let mut f = 1.0;
        for (k, dk) in d.iter_mut().enumerate().skip(1) {
            f *= k as f64;
            *dk = e / f;
        }
        self.compose(&d)
    }

    pub fn ln(&self) -> Jet {
        let a = self.value();
        let mut d = vec![a.ln(); self.taylor_len()];
        for (k, dk) in d.iter_mut().enumerate().skip(1) {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            *dk = sign / (k as f64 * a.powi(k as i32));
        }
        self.compose(&d)
    }

    pub fn powf(&self, p: f64) -> Jet {
        let a = self.value();
        let mut d = vec![0.0; self.taylor_len()];
        let mut binom = 1.0;
        for (k, dk) in d.iter_mut().enumerate() {
            if k > 0 {
                binom *= (p - (k as f64 - 1.0)) / k as f64;
            }
            *dk = binom * a.powf(p - k as f64);
        }
        self.compose(&d)
    }

    pub fn powi(&self, k: i32) -> Jet {
        if k < 0 {
            return self.recip().powi(-k);
        }
        let mut acc = Jet::constant(&self.space, 1.0).truncate(self.order);
        let mut base = self.clone();
        let mut e = k as u32;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    pub fn recip(&self) -> Jet {
        self.powf(-1.0)
    }

    fn trig(&self, cosine: bool) -> Jet {
        let a = self.value();
        let (s, c) = a.sin_cos();
        // derivatives of sin cycle sin, cos, -sin, -cos
        let cycle = if cosine { [c, -s, -c, s] } else { [s, c, -s, -c] };
        let mut d = vec![0.0; self.taylor_len()];
        let mut f = 1.0;
        for (k, dk) in d.iter_mut().enumerate() {
            if k > 0 {
                f *= k as f64;
            }
            *dk = cycle[k % 4] / f;
        }
        self.compose(&d)
    }

    pub fn sin(&self) -> Jet {
        self.trig(false)
    }

    pub fn cos(&self) -> Jet {
        self.trig(true)
    }

    pub fn max_abs(&self) -> f64 {
        self.c.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl Value for Jet {
    type Ctx = Arc<JetSpace>;
    fn lift(ctx: &Arc<JetSpace>, v: f64) -> Jet {
        Jet::constant(ctx, v)
    }
    fn re(&self) -> f64 {
        self.value()
    }
    fn add(&self, o: &Jet) -> Jet {
        Jet::add(self, o)
    }
    fn mul(&self, o: &Jet) -> Jet {
        Jet::mul(self, o)
    }
    fn neg(&self) -> Jet {
        self.scale(-1.0)
    }
    fn recip(&self) -> Jet {
        Jet::recip(self)
    }
    fn powi(&self, k: i32) -> Jet {
        Jet::powi(self, k)
    }
    fn powf(&self, k: f64) -> Jet {
        Jet::powf(self, k)
    }
    fn exp(&self) -> Jet {
        Jet::exp(self)
    }
    fn ln(&self) -> Jet {
        Jet::ln(self)
    }
    fn sin(&self) -> Jet {
        Jet::sin(self)
    }
    fn cos(&self) -> Jet {
        Jet::cos(self)
    }
}
