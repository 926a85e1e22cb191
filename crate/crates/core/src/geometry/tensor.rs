use crate::scalar::Scalar;

use super::GeometryError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Slot {
    Up,
    Down,
}

impl Slot {
    pub fn flip(self) -> Slot {
        match self {
            Slot::Up => Slot::Down,
            Slot::Down => Slot::Up,
        }
    }
}

/// Dense multi-index array over a chart of dimension `dim`.
///
/// Components are stored row-major with the first slot most significant.
/// `weight` is the conformal weight tag: raising an index adds −2,
/// lowering adds +2.
#[derive(Clone, Debug)]
pub struct Tensor<S> {
    pub dim: usize,
    pub slots: Vec<Slot>,
    pub weight: i32,
    pub data: Vec<S>,
}

/// Iterates all multi-indices of the given rank in storage order.
pub fn multi_indices(dim: usize, rank: usize) -> impl Iterator<Item = Vec<usize>> {
    let total = dim.pow(rank as u32);
    (0..total).map(move |mut flat| {
        let mut idx = vec![0; rank];
        for k in (0..rank).rev() {
            idx[k] = flat % dim;
            flat /= dim;
        }
        idx
    })
}

pub fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

/// Sign of a permutation given as an index list, 0 if not a permutation.
pub fn permutation_sign(p: &[usize]) -> i32 {
    let n = p.len();
    let mut seen = vec![false; n];
    for &v in p {
        if v >= n || seen[v] {
            return 0;
        }
        seen[v] = true;
    }
    let mut sign = 1;
    let mut visited = vec![false; n];
    for i in 0..n {
        if visited[i] {
            continue;
        }
        let mut len = 0;
        let mut j = i;
        while !visited[j] {
            visited[j] = true;
            j = p[j];
            len += 1;
        }
        if len % 2 == 0 {
            sign = -sign;
        }
    }
    sign
}

/// All permutations of `0..k` with their signs.
pub fn permutations(k: usize) -> Vec<(Vec<usize>, i32)> {
    fn rec(cur: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == used.len() {
            out.push(cur.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                cur.push(i);
                rec(cur, used, out);
                cur.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; k], &mut out);
    out.into_iter().map(|p| {
        let s = permutation_sign(&p);
        (p, s)
    }).collect()
}

impl<S: Scalar> Tensor<S> {
    pub fn zeros(ctx: &S::Ctx, dim: usize, slots: Vec<Slot>, weight: i32) -> Tensor<S> {
        let len = dim.pow(slots.len() as u32);
        Tensor { dim, slots, weight, data: vec![S::constant(ctx, 0.0); len] }
    }

    pub fn from_fn(dim: usize, slots: Vec<Slot>, weight: i32, mut f: impl FnMut(&[usize]) -> S) -> Tensor<S> {
        let data = multi_indices(dim, slots.len()).map(|i| f(&i)).collect();
        Tensor { dim, slots, weight, data }
    }

    pub fn scalar(v: S, weight: i32) -> Tensor<S> {
        Tensor { dim: 0, slots: Vec::new(), weight, data: vec![v] }
    }

    pub fn rank(&self) -> usize {
        self.slots.len()
    }

    pub fn flat(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.rank());
        idx.iter().fold(0, |acc, &i| acc * self.dim + i)
    }

    pub fn get(&self, idx: &[usize]) -> &S {
        &self.data[self.flat(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: S) {
        let k = self.flat(idx);
        self.data[k] = v;
    }

    pub fn map<T>(&self, f: impl Fn(&S) -> T) -> Tensor<T> {
        Tensor { dim: self.dim, slots: self.slots.clone(), weight: self.weight, data: self.data.iter().map(f).collect() }
    }

    fn same_shape(&self, o: &Tensor<S>) {
        assert_eq!(self.dim, o.dim, "dimension mismatch");
        assert_eq!(self.slots, o.slots, "slot mismatch");
    }

    pub fn add(&self, o: &Tensor<S>) -> Tensor<S> {
        self.same_shape(o);
        Tensor { dim: self.dim, slots: self.slots.clone(), weight: self.weight, data: self.data.iter().zip(&o.data).map(|(a, b)| a.add(b)).collect() }
    }

    pub fn sub(&self, o: &Tensor<S>) -> Tensor<S> {
        self.same_shape(o);
        Tensor { dim: self.dim, slots: self.slots.clone(), weight: self.weight, data: self.data.iter().zip(&o.data).map(|(a, b)| a.sub(b)).collect() }
    }

    /// Multiplies every component by a scalar field.
    pub fn times(&self, s: &S) -> Tensor<S> {
        self.map(|v| v.mul(s))
    }

    pub fn scale(&self, ctx: &S::Ctx, c: f64) -> Tensor<S> {
        self.map(|v| v.scale(ctx, c))
    }

    pub fn with_weight(mut self, w: i32) -> Tensor<S> {
        self.weight = w;
        self
    }

    pub fn outer(&self, o: &Tensor<S>) -> Tensor<S> {
        let dim = if self.rank() == 0 { o.dim } else { self.dim };
        let mut slots = self.slots.clone();
        slots.extend(o.slots.iter().copied());
        let mut data = Vec::with_capacity(self.data.len() * o.data.len());
        for a in &self.data {
            for b in &o.data {
                data.push(a.mul(b));
            }
        }
        Tensor { dim, slots, weight: self.weight + o.weight, data }
    }

    /// Contracts slot `i` against slot `j`; the two must have opposite variance.
    pub fn contract(&self, ctx: &S::Ctx, i: usize, j: usize) -> Result<Tensor<S>, GeometryError> {
        let r = self.rank();
        if i >= r || j >= r || i == j {
            return Err(GeometryError::SlotOutOfRange { slot: i.max(j), rank: r });
        }
        if self.slots[i] == self.slots[j] {
            return Err(GeometryError::VarianceMismatch);
        }
        let keep: Vec<usize> = (0..r).filter(|k| *k != i && *k != j).collect();
        let slots: Vec<Slot> = keep.iter().map(|&k| self.slots[k]).collect();
        let mut full = vec![0usize; r];
        Ok(Tensor::from_fn(self.dim, slots, self.weight, |idx| {
            for (p, &k) in keep.iter().enumerate() {
                full[k] = idx[p];
            }
            let mut acc = S::constant(ctx, 0.0);
            for s in 0..self.dim {
                full[i] = s;
                full[j] = s;
                let v = self.get(&full);
                if !v.is_zero() {
                    acc = acc.add(v);
                }
            }
            acc
        }))
    }

    /// New slot `k` is old slot `perm[k]`.
    pub fn permute(&self, perm: &[usize]) -> Tensor<S> {
        assert_eq!(perm.len(), self.rank());
        let slots = perm.iter().map(|&p| self.slots[p]).collect();
        let mut old = vec![0usize; self.rank()];
        Tensor::from_fn(self.dim, slots, self.weight, |idx| {
            for (k, &p) in perm.iter().enumerate() {
                old[p] = idx[k];
            }
            self.get(&old).clone()
        })
    }

    fn project(&self, ctx: &S::Ctx, over: &[usize], skew: bool) -> Result<Tensor<S>, GeometryError> {
        for &s in over {
            if s >= self.rank() {
                return Err(GeometryError::SlotOutOfRange { slot: s, rank: self.rank() });
            }
        }
        if over.iter().any(|&s| self.slots[s] != self.slots[over[0]]) {
            return Err(GeometryError::MixedVariance);
        }
        let perms = permutations(over.len());
        let norm = 1.0 / factorial(over.len());
        let mut src = vec![0usize; self.rank()];
        Ok(Tensor::from_fn(self.dim, self.slots.clone(), self.weight, |idx| {
            let mut acc = S::constant(ctx, 0.0);
            for (p, sign) in &perms {
                src.copy_from_slice(idx);
                for (k, &slot) in over.iter().enumerate() {
                    src[slot] = idx[over[p[k]]];
                }
                let v = self.get(&src);
                if v.is_zero() {
                    continue;
                }
                acc = if skew && *sign < 0 { acc.sub(v) } else { acc.add(v) };
            }
            acc.scale(ctx, norm)
        }))
    }

    /// Projection onto the totally skew part over `over`, with the 1/k! factor.
    pub fn antisymmetrize(&self, ctx: &S::Ctx, over: &[usize]) -> Result<Tensor<S>, GeometryError> {
        self.project(ctx, over, true)
    }

    pub fn symmetrize(&self, ctx: &S::Ctx, over: &[usize]) -> Result<Tensor<S>, GeometryError> {
        self.project(ctx, over, false)
    }

    /// Coordinate partial derivative as a new leftmost covariant slot.
    pub fn partial(&self, ctx: &S::Ctx) -> Tensor<S> {
        let mut slots = vec![Slot::Down];
        slots.extend(self.slots.iter().copied());
        let mut data = Vec::with_capacity(self.data.len() * self.dim);
        for a in 0..self.dim {
            for v in &self.data {
                data.push(v.partial(ctx, a));
            }
        }
        Tensor { dim: self.dim, slots, weight: self.weight, data }
    }
}

impl Tensor<f64> {
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl Tensor<crate::jet::Jet> {
    /// Component values at the expansion point.
    pub fn values(&self) -> Tensor<f64> {
        self.map(|j| j.value())
    }

    pub fn truncate(&self, order: i32) -> Tensor<crate::jet::Jet> {
        self.map(|j| j.truncate(order))
    }
}
