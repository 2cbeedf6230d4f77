use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Geometry of a 2D cross-correlation over `[B, C, F, T]` maps.
///
/// Weights are laid out `[out_channels, in_channels, kernel_h, kernel_w]`; the
/// height axis runs along frequency and the width axis along time.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Conv2dSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride: (usize, usize),
    pub padding: (usize, usize),
    pub bias: bool,
}

impl Conv2dSpec {
    /// Stride 1, zero padding that preserves both extents for odd kernels.
    pub fn same(in_channels: usize, out_channels: usize, kernel: usize) -> Self {
        Conv2dSpec {
            in_channels,
            out_channels,
            kernel_h: kernel,
            kernel_w: kernel,
            stride: (1, 1),
            padding: (kernel / 2, kernel / 2),
            bias: true,
        }
    }

    pub fn weight_dims(&self) -> [usize; 4] {
        [self.out_channels, self.in_channels, self.kernel_h, self.kernel_w]
    }

    pub fn weight_len(&self) -> usize {
        self.weight_dims().iter().product()
    }

    pub fn param_count(&self) -> usize {
        self.weight_len() + if self.bias { self.out_channels } else { 0 }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [self.in_channels, self.out_channels, self.kernel_h, self.kernel_w, self.stride.0, self.stride.1];
        if positive.iter().any(|&v| v == 0) {
            return Err(Error::invalid(format!("conv extents and strides must be positive: {self:?}")));
        }
        Ok(())
    }

    /// `floor((in + 2·pad − kernel) / stride) + 1` per axis.
    pub fn output_extents(&self, f_in: usize, t_in: usize) -> Result<(usize, usize)> {
        self.validate()?;
        let axis = |n: usize, k: usize, p: usize, s: usize| -> Result<usize> {
            let padded = n + 2 * p;
            if padded < k {
                return Err(Error::shape(format!(
                    "kernel {k} larger than padded extent {padded}"
                )));
            }
            Ok((padded - k) / s + 1)
        };
        Ok((
            axis(f_in, self.kernel_h, self.padding.0, self.stride.0)?,
            axis(t_in, self.kernel_w, self.padding.1, self.stride.1)?,
        ))
    }
}

/// Output positions `o` in `[lo, hi)` for which `o·stride + tap − pad` falls
/// inside `[0, n_in)`.
#[inline]
fn valid_range(n_out: usize, n_in: usize, stride: usize, tap: usize, pad: usize) -> (usize, usize) {
    let (s, k, p, n) = (stride as i64, tap as i64, pad as i64, n_in as i64);
    let lo = if p > k { (p - k + s - 1) / s } else { 0 };
    let hi = ((n + p - k + s - 1) / s).clamp(0, n_out as i64);
    (lo.min(hi) as usize, hi as usize)
}

fn check_weights<S: Scalar>(
    x: &Tensor<S>,
    w: &Tensor<S>,
    b: Option<&Tensor<S>>,
    spec: &Conv2dSpec,
) -> Result<[usize; 4]> {
    spec.validate()?;
    let dims = x.dims4()?;
    if dims[1] != spec.in_channels {
        return Err(Error::shape(format!(
            "input has {} channels, conv expects {}",
            dims[1], spec.in_channels
        )));
    }
    if w.dims() != spec.weight_dims() {
        return Err(Error::shape(format!("weight {:?}, expected {:?}", w.dims(), spec.weight_dims())));
    }
    match (b, spec.bias) {
        (Some(b), true) if b.dims() == [spec.out_channels] => {}
        (None, false) => {}
        (Some(b), true) => {
            return Err(Error::shape(format!("bias {:?}, expected [{}]", b.dims(), spec.out_channels)))
        }
        (Some(_), false) => return Err(Error::shape("bias given to a bias-free conv")),
        (None, true) => return Err(Error::shape("conv expects a bias")),
    }
    Ok(dims)
}

/// Cross-correlation (no kernel flip) with zero padding.
pub fn conv2d<S: Scalar>(
    x: &Tensor<S>,
    w: &Tensor<S>,
    b: Option<&Tensor<S>>,
    spec: &Conv2dSpec,
) -> Result<Tensor<S>> {
    let [batch, cin, f_in, t_in] = check_weights(x, w, b, spec)?;
    x.ensure_finite("conv2d input")?;
    let (f_out, t_out) = spec.output_extents(f_in, t_in)?;
    let cout = spec.out_channels;
    let (kh, kw) = (spec.kernel_h, spec.kernel_w);
    let (sh, sw) = spec.stride;
    let (ph, pw) = spec.padding;
    let xd = x.data();
    let wd = w.data();
    let plane_out = f_out * t_out;
    let mut out = vec![S::zero(); batch * cout * plane_out];

    out.par_chunks_mut(plane_out).enumerate().for_each(|(bo, dst)| {
        let (bi, o) = (bo / cout, bo % cout);
        let init = b.map_or(S::zero(), |b| b.data()[o]);
        dst.iter_mut().for_each(|v| *v = init);
        for c in 0..cin {
            let src = &xd[(bi * cin + c) * f_in * t_in..][..f_in * t_in];
            for i in 0..kh {
                let (flo, fhi) = valid_range(f_out, f_in, sh, i, ph);
                for j in 0..kw {
                    let wv = wd[((o * cin + c) * kh + i) * kw + j];
                    let (tlo, thi) = valid_range(t_out, t_in, sw, j, pw);
                    if tlo >= thi {
                        continue;
                    }
                    for fo in flo..fhi {
                        let fi = fo * sh + i - ph;
                        let row = &src[fi * t_in..][..t_in];
                        let orow = &mut dst[fo * t_out..][..t_out];
                        if sw == 1 {
                            let shift = j as isize - pw as isize;
                            let srow = &row[(tlo as isize + shift) as usize..(thi as isize + shift) as usize];
                            for (ov, &xv) in orow[tlo..thi].iter_mut().zip(srow) {
                                *ov += wv * xv;
                            }
                        } else {
                            for to in tlo..thi {
                                orow[to] += wv * row[to * sw + j - pw];
                            }
                        }
                    }
                }
            }
        }
    });
    Tensor::new(vec![batch, cout, f_out, t_out], out)
}

/// Gradients of a [`conv2d`] call.
#[derive(Clone, Debug)]
pub struct Conv2dGrads<S> {
    pub input: Tensor<S>,
    pub weight: Tensor<S>,
    pub bias: Option<Tensor<S>>,
}

/// Vector–Jacobian product of [`conv2d`] for upstream gradient `gy`.
pub fn conv2d_backward<S: Scalar>(
    x: &Tensor<S>,
    w: &Tensor<S>,
    spec: &Conv2dSpec,
    gy: &Tensor<S>,
) -> Result<Conv2dGrads<S>> {
    let [batch, cin, f_in, t_in] = x.dims4()?;
    if w.dims() != spec.weight_dims() || cin != spec.in_channels {
        return Err(Error::shape("conv2d_backward: weight/input disagree with spec"));
    }
    let (f_out, t_out) = spec.output_extents(f_in, t_in)?;
    let cout = spec.out_channels;
    if gy.dims() != [batch, cout, f_out, t_out] {
        return Err(Error::shape(format!(
            "upstream gradient {:?}, expected {:?}",
            gy.dims(),
            [batch, cout, f_out, t_out]
        )));
    }
    let (kh, kw) = (spec.kernel_h, spec.kernel_w);
    let (sh, sw) = spec.stride;
    let (ph, pw) = spec.padding;
    let (xd, wd, gd) = (x.data(), w.data(), gy.data());

    // Input gradient: one batch item per task.
    let mut gx = vec![S::zero(); x.len()];
    gx.par_chunks_mut(cin * f_in * t_in).enumerate().for_each(|(bi, gxb)| {
        for o in 0..cout {
            let g = &gd[(bi * cout + o) * f_out * t_out..][..f_out * t_out];
            for c in 0..cin {
                let gxc = &mut gxb[c * f_in * t_in..][..f_in * t_in];
                for i in 0..kh {
                    let (flo, fhi) = valid_range(f_out, f_in, sh, i, ph);
                    for j in 0..kw {
                        let wv = wd[((o * cin + c) * kh + i) * kw + j];
                        let (tlo, thi) = valid_range(t_out, t_in, sw, j, pw);
                        for fo in flo..fhi {
                            let fi = fo * sh + i - ph;
                            for to in tlo..thi {
                                gxc[fi * t_in + to * sw + j - pw] += wv * g[fo * t_out + to];
                            }
                        }
                    }
                }
            }
        }
    });

    // Weight gradient: one output channel per task.
    let mut gw = vec![S::zero(); w.len()];
    gw.par_chunks_mut(cin * kh * kw).enumerate().for_each(|(o, gwo)| {
        for bi in 0..batch {
            let g = &gd[(bi * cout + o) * f_out * t_out..][..f_out * t_out];
            for c in 0..cin {
                let src = &xd[(bi * cin + c) * f_in * t_in..][..f_in * t_in];
                for i in 0..kh {
                    let (flo, fhi) = valid_range(f_out, f_in, sh, i, ph);
                    for j in 0..kw {
                        let (tlo, thi) = valid_range(t_out, t_in, sw, j, pw);
                        let mut acc = S::zero();
                        for fo in flo..fhi {
                            let fi = fo * sh + i - ph;
                            for to in tlo..thi {
                                acc += g[fo * t_out + to] * src[fi * t_in + to * sw + j - pw];
                            }
                        }
                        gwo[(c * kh + i) * kw + j] += acc;
                    }
                }
            }
        }
    });

    let bias = spec.bias.then(|| {
        let mut gb = vec![S::zero(); cout];
        for bi in 0..batch {
            for (o, v) in gb.iter_mut().enumerate() {
                *v += gd[(bi * cout + o) * f_out * t_out..][..f_out * t_out].iter().copied().sum();
            }
        }
        Tensor::new(vec![cout], gb).expect("bias gradient dims")
    });

    Ok(Conv2dGrads {
        input: Tensor::new(x.dims().to_vec(), gx)?,
        weight: Tensor::new(w.dims().to_vec(), gw)?,
        bias,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_kernel_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Tensor::<f32>::random_uniform(vec![2, 1, 5, 4], -1.0, 1.0, &mut rng);
        let spec = Conv2dSpec { padding: (0, 0), ..Conv2dSpec::same(1, 1, 1) };
        let w = Tensor::full(vec![1, 1, 1, 1], 1.0);
        let b = Tensor::zeros(vec![1]);
        assert_eq!(conv2d(&x, &w, Some(&b), &spec).unwrap(), x);
    }

    #[test]
    fn zero_weights_give_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = Tensor::<f32>::random_uniform(vec![1, 3, 4, 4], -1.0, 1.0, &mut rng);
        let spec = Conv2dSpec::same(3, 2, 3);
        let w = Tensor::zeros(spec.weight_dims().to_vec());
        let b = Tensor::new(vec![2], vec![0.25, -1.5]).unwrap();
        let y = conv2d(&x, &w, Some(&b), &spec).unwrap();
        assert!(y.data()[..16].iter().all(|&v| v == 0.25));
        assert!(y.data()[16..].iter().all(|&v| v == -1.5));
    }

    #[test]
    fn output_extent_formula() {
        let spec = Conv2dSpec { stride: (2, 3), padding: (1, 0), ..Conv2dSpec::same(1, 1, 3) };
        assert_eq!(spec.output_extents(7, 10).unwrap(), (4, 3));
        let spec = Conv2dSpec { padding: (0, 0), ..Conv2dSpec::same(1, 1, 5) };
        assert!(spec.output_extents(3, 8).is_err());
    }

    #[test]
    fn rejects_mismatched_shapes_and_nan() {
        let spec = Conv2dSpec::same(2, 1, 3);
        let w = Tensor::<f32>::zeros(spec.weight_dims().to_vec());
        let b = Tensor::zeros(vec![1]);
        let x = Tensor::zeros(vec![1, 3, 4, 4]);
        assert!(matches!(conv2d(&x, &w, Some(&b), &spec), Err(Error::Shape(_))));
        let mut x = Tensor::zeros(vec![1, 2, 4, 4]);
        x.data_mut()[3] = f32::INFINITY;
        assert!(matches!(conv2d(&x, &w, Some(&b), &spec), Err(Error::NonFinite(_))));
        assert!(matches!(conv2d(&x, &w, None, &spec), Err(Error::Shape(_))));
    }
}
