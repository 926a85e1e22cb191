use crate::scalar::Scalar;

use super::{GeometryError, Slot, Tensor};

/// Applies `m[new][old]` to one slot of `t`.
pub fn transform_slot<S: Scalar>(ctx: &S::Ctx, t: &Tensor<S>, slot: usize, m: &[Vec<S>]) -> Tensor<S> {
    let n = t.dim;
    let mut src = vec![0usize; t.rank()];
    Tensor::from_fn(n, t.slots.clone(), t.weight, |idx| {
        src.copy_from_slice(idx);
        let mut acc = S::constant(ctx, 0.0);
        for (e, c) in m[idx[slot]].iter().enumerate() {
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

/// Components of `t` in the coframe `θ^a = θ^a_μ dx^μ` (rows of `theta`).
/// Lower slots are contracted with the dual frame, upper slots with θ.
pub fn coframe_components<S: Scalar>(ctx: &S::Ctx, t: &Tensor<S>, theta: &[Vec<S>]) -> Result<Tensor<S>, GeometryError> {
    let e = S::invert(ctx, theta).ok_or_else(|| GeometryError::SingularCoframe("expansion point".into()))?;
    let n = t.dim;
    // frame vectors e_a = e^μ_a ∂_μ: row a of the transposed inverse
    let et: Vec<Vec<S>> = (0..n).map(|a| (0..n).map(|mu| e[mu][a].clone()).collect()).collect();
    let mut out = t.clone();
    for k in 0..t.rank() {
        out = match t.slots[k] {
            Slot::Down => transform_slot(ctx, &out, k, &et),
            Slot::Up => transform_slot(ctx, &out, k, theta),
        };
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_coframe_is_noop() {
        let t = Tensor::from_fn(3, vec![Slot::Down, Slot::Up], 0, |i| (i[0] * 7 + i[1]) as f64);
        let id: Vec<Vec<f64>> = (0..3).map(|i| (0..3).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        assert_eq!(coframe_components(&(), &t, &id).unwrap().data, t.data);
    }

    #[test]
    fn orthonormalizes_diagonal_metric() {
        let g = Tensor::from_fn(3, vec![Slot::Down, Slot::Down], 2, |i| if i[0] == i[1] { [4.0, 9.0, 1.0][i[0]] } else { 0.0 });
        let theta = vec![vec![2.0, 0.0, 0.0], vec![0.0, 3.0, 0.0], vec![0.0, 0.0, 1.0]];
        let f = coframe_components(&(), &g, &theta).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((f.get(&[i, j]) - if i == j { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
        let singular = vec![vec![1.0, 0.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]];
        assert!(coframe_components(&(), &g, &singular).is_err());
    }
}
