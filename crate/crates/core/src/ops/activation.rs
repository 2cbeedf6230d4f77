use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[inline]
pub fn relu_scalar<S: Scalar>(v: S) -> S {
    v.max(S::zero())
}

/// Logistic function, clamped to the open unit interval so that saturated
/// inputs never produce exactly 0 or 1.
#[inline]
pub fn sigmoid_scalar<S: Scalar>(v: S) -> S {
    let s = if v >= S::zero() {
        S::one() / (S::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (S::one() + e)
    };
    let upper = S::one() - S::epsilon() / S::of(2.0);
    s.max(S::min_positive_value()).min(upper)
}

pub fn relu<S: Scalar>(x: &Tensor<S>) -> Tensor<S> {
    x.map(relu_scalar)
}

pub fn sigmoid<S: Scalar>(x: &Tensor<S>) -> Tensor<S> {
    x.map(sigmoid_scalar)
}

/// Gradient of ReLU given its input; zero at and below the origin.
pub fn relu_backward<S: Scalar>(x: &Tensor<S>, gy: &Tensor<S>) -> Result<Tensor<S>> {
    x.zip_map(gy, |v, g| if v > S::zero() { g } else { S::zero() })
}

/// Gradient of the sigmoid given its output `s`.
pub fn sigmoid_backward<S: Scalar>(s: &Tensor<S>, gy: &Tensor<S>) -> Result<Tensor<S>> {
    s.zip_map(gy, |s, g| g * s * (S::one() - s))
}

fn axis_layout(dims: &[usize], axis: usize) -> Result<(usize, usize, usize)> {
    if axis >= dims.len() {
        return Err(Error::invalid(format!("softmax axis {axis} out of range for {dims:?}")));
    }
    let outer = dims[..axis].iter().product();
    let inner = dims[axis + 1..].iter().product();
    Ok((outer, dims[axis], inner))
}

/// `softmax(x / τ)` along `axis`.
pub fn softmax<S: Scalar>(x: &Tensor<S>, axis: usize, temperature: S) -> Result<Tensor<S>> {
    if !(temperature > S::zero()) || !temperature.is_finite() {
        return Err(Error::invalid(format!("softmax temperature must be positive, got {temperature}")));
    }
    let (outer, n, inner) = axis_layout(x.dims(), axis)?;
    let xd = x.data();
    let mut out = vec![S::zero(); x.len()];
    for o in 0..outer {
        for i in 0..inner {
            let idx = |k: usize| (o * n + k) * inner + i;
            let max = (0..n).map(|k| xd[idx(k)]).fold(S::neg_infinity(), S::max);
            let mut total = S::zero();
            for k in 0..n {
                let e = ((xd[idx(k)] - max) / temperature).exp();
                out[idx(k)] = e;
                total += e;
            }
            for k in 0..n {
                out[idx(k)] /= total;
            }
        }
    }
    Tensor::new(x.dims().to_vec(), out)
}

/// Gradient of [`softmax`] given its output `p`: `p ⊙ (g − Σ p g) / τ`.
pub fn softmax_backward<S: Scalar>(p: &Tensor<S>, gy: &Tensor<S>, axis: usize, temperature: S) -> Result<Tensor<S>> {
    p.check_same_dims(gy)?;
    let (outer, n, inner) = axis_layout(p.dims(), axis)?;
    let (pd, gd) = (p.data(), gy.data());
    let mut out = vec![S::zero(); p.len()];
    for o in 0..outer {
        for i in 0..inner {
            let idx = |k: usize| (o * n + k) * inner + i;
            let dot: S = (0..n).map(|k| pd[idx(k)] * gd[idx(k)]).sum();
            for k in 0..n {
                out[idx(k)] = pd[idx(k)] * (gd[idx(k)] - dot) / temperature;
            }
        }
    }
    Tensor::new(p.dims().to_vec(), out)
}
