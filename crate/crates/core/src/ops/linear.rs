use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

fn check<S: Scalar>(x: &Tensor<S>, w: &Tensor<S>, b: Option<&Tensor<S>>) -> Result<(usize, usize, usize)> {
    let [d_out, d_in] = w.dims2()?;
    let last = *x.dims().last().expect("tensors have rank >= 1");
    if last != d_in {
        return Err(Error::shape(format!("input last extent {last}, weight expects {d_in}")));
    }
    if let Some(b) = b {
        if b.dims() != [d_out] {
            return Err(Error::shape(format!("bias {:?}, expected [{d_out}]", b.dims())));
        }
    }
    Ok((x.len() / d_in, d_in, d_out))
}

/// Affine map along the last axis: `y = x·Wᵀ + b` with `W` shaped `[D_out, D_in]`.
pub fn linear<S: Scalar>(x: &Tensor<S>, w: &Tensor<S>, b: Option<&Tensor<S>>) -> Result<Tensor<S>> {
    let (rows, d_in, d_out) = check(x, w, b)?;
    let (xd, wd) = (x.data(), w.data());
    let mut out = Vec::with_capacity(rows * d_out);
    for r in 0..rows {
        let xr = &xd[r * d_in..][..d_in];
        for o in 0..d_out {
            let wr = &wd[o * d_in..][..d_in];
            let mut acc = b.map_or(S::zero(), |b| b.data()[o]);
            for (&a, &c) in xr.iter().zip(wr) {
                acc += a * c;
            }
            out.push(acc);
        }
    }
    let mut dims = x.dims().to_vec();
    *dims.last_mut().expect("rank >= 1") = d_out;
    Tensor::new(dims, out)
}

#[derive(Clone, Debug)]
pub struct LinearGrads<S> {
    pub input: Tensor<S>,
    pub weight: Tensor<S>,
    pub bias: Tensor<S>,
}

/// Vector–Jacobian product of [`linear`]. The bias gradient is returned even
/// for bias-free calls; callers ignore it.
pub fn linear_backward<S: Scalar>(x: &Tensor<S>, w: &Tensor<S>, gy: &Tensor<S>) -> Result<LinearGrads<S>> {
    let (rows, d_in, d_out) = check(x, w, None)?;
    if gy.len() != rows * d_out || gy.dims().last() != Some(&d_out) {
        return Err(Error::shape(format!("upstream gradient {:?} does not match output", gy.dims())));
    }
    let (xd, wd, gd) = (x.data(), w.data(), gy.data());
    let mut gx = vec![S::zero(); x.len()];
    let mut gw = vec![S::zero(); w.len()];
    let mut gb = vec![S::zero(); d_out];
    for r in 0..rows {
        let xr = &xd[r * d_in..][..d_in];
        let gxr = &mut gx[r * d_in..][..d_in];
        for o in 0..d_out {
            let g = gd[r * d_out + o];
            gb[o] += g;
            let wr = &wd[o * d_in..][..d_in];
            let gwr = &mut gw[o * d_in..][..d_in];
            for i in 0..d_in {
                gxr[i] += g * wr[i];
                gwr[i] += g * xr[i];
            }
        }
    }
    Ok(LinearGrads {
        input: Tensor::new(x.dims().to_vec(), gx)?,
        weight: Tensor::new(w.dims().to_vec(), gw)?,
        bias: Tensor::new(vec![d_out], gb)?,
    })
}
