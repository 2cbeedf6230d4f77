//! Frequency dynamic convolution.
//!
//! `K` basis kernels share one [`Conv2dSpec`]. An attention branch looks at
//! the time-averaged input, runs a kernel-3 convolution along frequency
//! (`C_in → K`, no bias), normalizes each of the `K` logits with inference
//! batch-norm statistics, and takes a softmax over `K` at temperature `τ`.
//! The resulting weights `π[b, k, f]` mix the basis outputs per output
//! frequency row, which is the same as convolving row `f` with the kernel
//! `Σₖ π[b, k, f]·Wₖ`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::init;
use crate::layer::{Gradients, Layer};
use crate::ops::{self, Conv2dSpec, BN_EPS};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const DEFAULT_BASIS: usize = 4;
pub const BRANCH_KERNEL: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct FdyParams<S> {
    pub spec: Conv2dSpec,
    /// `[K, C_out, C_in, kh, kw]`
    pub basis_weight: Tensor<S>,
    /// `[K, C_out]`, present when `spec.bias`.
    pub basis_bias: Option<Tensor<S>>,
    /// `[K, C_in, 3]`
    pub branch_weight: Tensor<S>,
    pub bn_gamma: Tensor<S>,
    pub bn_beta: Tensor<S>,
    /// Running statistics; buffers, not trained.
    pub bn_mean: Tensor<S>,
    pub bn_var: Tensor<S>,
    pub temperature: S,
}

fn validate(spec: &Conv2dSpec, basis: usize) -> Result<()> {
    spec.validate()?;
    if basis == 0 {
        return Err(Error::invalid("FDY needs at least one basis kernel"));
    }
    if spec.stride.0 != 1 || 2 * spec.padding.0 + 1 != spec.kernel_h {
        return Err(Error::invalid(
            "FDY requires a frequency-preserving conv (stride 1, same padding along frequency)",
        ));
    }
    Ok(())
}

impl<S: Scalar> FdyParams<S> {
    pub fn init<R: Rng + ?Sized>(spec: Conv2dSpec, basis: usize, temperature: f64, rng: &mut R) -> Result<Self> {
        validate(&spec, basis)?;
        let fan_in = spec.in_channels * spec.kernel_h * spec.kernel_w;
        let mut wdims = vec![basis];
        wdims.extend(spec.weight_dims());
        let basis_weight = init::uniform(wdims, fan_in, rng);
        let basis_bias = spec.bias.then(|| init::uniform(vec![basis, spec.out_channels], fan_in, rng));
        let branch_weight = init::uniform(
            vec![basis, spec.in_channels, BRANCH_KERNEL],
            spec.in_channels * BRANCH_KERNEL,
            rng,
        );
        Self::assemble(spec, basis_weight, basis_bias, branch_weight, temperature)
    }

    /// Wraps explicit basis and branch weights with default normalization
    /// statistics (`γ = 1, β = 0, μ = 0, σ² = 1`).
    pub fn assemble(
        spec: Conv2dSpec,
        basis_weight: Tensor<S>,
        basis_bias: Option<Tensor<S>>,
        branch_weight: Tensor<S>,
        temperature: f64,
    ) -> Result<Self> {
        let basis = basis_weight.dims()[0];
        validate(&spec, basis)?;
        if !(temperature > 0.0) || !temperature.is_finite() {
            return Err(Error::invalid(format!("FDY temperature must be positive, got {temperature}")));
        }
        let mut wdims = vec![basis];
        wdims.extend(spec.weight_dims());
        if basis_weight.dims() != wdims {
            return Err(Error::shape(format!("basis weight {:?}, expected {wdims:?}", basis_weight.dims())));
        }
        match (&basis_bias, spec.bias) {
            (Some(b), true) if b.dims() == [basis, spec.out_channels] => {}
            (None, false) => {}
            _ => return Err(Error::shape("basis bias does not match spec")),
        }
        if branch_weight.dims() != [basis, spec.in_channels, BRANCH_KERNEL] {
            return Err(Error::shape(format!("branch weight {:?}", branch_weight.dims())));
        }
        Ok(FdyParams {
            spec,
            basis_weight,
            basis_bias,
            branch_weight,
            bn_gamma: Tensor::full(vec![basis], S::one()),
            bn_beta: Tensor::zeros(vec![basis]),
            bn_mean: Tensor::zeros(vec![basis]),
            bn_var: Tensor::full(vec![basis], S::one()),
            temperature: S::of(temperature),
        })
    }

    pub fn basis(&self) -> usize {
        self.basis_weight.dims()[0]
    }

    /// Basis kernel `k` as a `[C_out, C_in, kh, kw]` tensor.
    pub fn kernel(&self, k: usize) -> Tensor<S> {
        let n = self.spec.weight_len();
        Tensor::new(self.spec.weight_dims().to_vec(), self.basis_weight.data()[k * n..][..n].to_vec())
            .expect("basis slice matches spec")
    }

    pub fn kernel_bias(&self, k: usize) -> Option<Tensor<S>> {
        let c = self.spec.out_channels;
        self.basis_bias
            .as_ref()
            .map(|b| Tensor::new(vec![c], b.data()[k * c..][..c].to_vec()).expect("bias slice"))
    }

    /// Closed-form trainable count: `K·(conv weights + bias) + 3·C_in·K + 2K`.
    pub fn count(spec: &Conv2dSpec, basis: usize) -> usize {
        basis * spec.param_count() + BRANCH_KERNEL * spec.in_channels * basis + 2 * basis
    }

    fn branch_spec(&self) -> Conv2dSpec {
        Conv2dSpec {
            in_channels: self.spec.in_channels,
            out_channels: self.basis(),
            kernel_h: BRANCH_KERNEL,
            kernel_w: 1,
            stride: (1, 1),
            padding: (BRANCH_KERNEL / 2, 0),
            bias: false,
        }
    }

    fn branch_kernel4(&self) -> Tensor<S> {
        self.branch_weight
            .clone()
            .reshape(vec![self.basis(), self.spec.in_channels, BRANCH_KERNEL, 1])
            .expect("branch weight reshape")
    }
}

/// Time mean, `[B, C, F, T] → [B, C, F, 1]`.
fn time_pool<S: Scalar>(x: &Tensor<S>) -> Result<Tensor<S>> {
    let [b, c, f, t] = x.dims4()?;
    let norm = S::one() / S::of(t as f64);
    let data = x.data().chunks_exact(t).map(|r| r.iter().copied().sum::<S>() * norm).collect();
    Tensor::new(vec![b, c, f, 1], data)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FdyConv<S> {
    pub params: FdyParams<S>,
}

#[derive(Clone, Debug)]
pub struct FdyTrace<S> {
    x: Tensor<S>,
    /// `[B, C_in, F, 1]`
    pooled: Tensor<S>,
    /// Branch output before normalization, `[B, K, F, 1]`.
    logits: Tensor<S>,
    /// `[B, K, F, 1]`
    weights: Tensor<S>,
    basis_out: Vec<Tensor<S>>,
}

impl<S: Scalar> FdyTrace<S> {
    /// Softmax attention `π`, shaped `[B, K, F, 1]`.
    pub fn attention(&self) -> &Tensor<S> {
        &self.weights
    }
}

impl<S: Scalar> FdyConv<S> {
    /// Attention weights `π[b, k, f]` for input `x`, shaped `[B, K, F, 1]`.
    pub fn attention(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        let pooled = time_pool(x)?;
        let logits = ops::conv2d(&pooled, &self.params.branch_kernel4(), None, &self.params.branch_spec())?;
        self.normalize_softmax(&logits)
    }

    fn normalize_softmax(&self, logits: &Tensor<S>) -> Result<Tensor<S>> {
        let p = &self.params;
        let normed = ops::batchnorm_infer(logits, &p.bn_gamma, &p.bn_beta, &p.bn_mean, &p.bn_var)?;
        ops::softmax(&normed, 1, p.temperature)
    }
}

impl<S: Scalar> Layer<S> for FdyConv<S> {
    type Trace = FdyTrace<S>;

    fn forward_traced(&self, x: &Tensor<S>) -> Result<(Tensor<S>, FdyTrace<S>)> {
        let p = &self.params;
        let [batch, _, f_in, _] = x.dims4()?;
        let pooled = time_pool(x)?;
        let logits = ops::conv2d(&pooled, &p.branch_kernel4(), None, &p.branch_spec())?;
        let weights = self.normalize_softmax(&logits)?;

        let basis_out = (0..p.basis())
            .map(|k| ops::conv2d(x, &p.kernel(k), p.kernel_bias(k).as_ref(), &p.spec))
            .collect::<Result<Vec<_>>>()?;
        let [_, cout, f_out, t_out] = basis_out[0].dims4()?;
        if f_out != f_in {
            return Err(Error::shape("FDY conv must preserve the frequency extent"));
        }
        let kk = p.basis();
        let mut y = Tensor::zeros(vec![batch, cout, f_out, t_out]);
        let wd = weights.data();
        for (k, yk) in basis_out.iter().enumerate() {
            let (yd, ykd) = (y.data_mut(), yk.data());
            for bi in 0..batch {
                for o in 0..cout {
                    for fi in 0..f_out {
                        let pi = wd[(bi * kk + k) * f_out + fi];
                        let base = ((bi * cout + o) * f_out + fi) * t_out;
                        for ti in 0..t_out {
                            yd[base + ti] += pi * ykd[base + ti];
                        }
                    }
                }
            }
        }
        Ok((y, FdyTrace { x: x.clone(), pooled, logits, weights, basis_out }))
    }

    fn backward(&self, tr: &FdyTrace<S>, gy: &Tensor<S>) -> Result<Gradients<S>> {
        let p = &self.params;
        let kk = p.basis();
        let [batch, cout, f_out, t_out] = tr.basis_out[0].dims4()?;
        if gy.dims() != [batch, cout, f_out, t_out] {
            return Err(Error::shape(format!("upstream gradient {:?}", gy.dims())));
        }
        let (gd, wd) = (gy.data(), tr.weights.data());

        let mut gweights = Tensor::zeros(tr.weights.dims().to_vec());
        let mut gx = Tensor::zeros(tr.x.dims().to_vec());
        let mut gbasis_w = Vec::with_capacity(p.basis_weight.len());
        let mut gbasis_b = Vec::new();
        for k in 0..kk {
            let ykd = tr.basis_out[k].data();
            let mut gyk = Tensor::zeros(gy.dims().to_vec());
            {
                let (gkd, gwd) = (gyk.data_mut(), gweights.data_mut());
                for bi in 0..batch {
                    for o in 0..cout {
                        for fi in 0..f_out {
                            let wi = (bi * kk + k) * f_out + fi;
                            let base = ((bi * cout + o) * f_out + fi) * t_out;
                            let mut acc = S::zero();
                            for ti in 0..t_out {
                                acc += gd[base + ti] * ykd[base + ti];
                                gkd[base + ti] = wd[wi] * gd[base + ti];
                            }
                            gwd[wi] += acc;
                        }
                    }
                }
            }
            let g = ops::conv2d_backward(&tr.x, &p.kernel(k), &p.spec, &gyk)?;
            gx = gx.add(&g.input)?;
            gbasis_w.extend_from_slice(g.weight.data());
            if let Some(b) = g.bias {
                gbasis_b.extend_from_slice(b.data());
            }
        }

        // softmax → batch-norm → branch conv → time mean
        let gnormed = ops::softmax_backward(&tr.weights, &gweights, 1, p.temperature)?;
        let eps = S::of(BN_EPS);
        let mut ggamma = vec![S::zero(); kk];
        let mut gbeta = vec![S::zero(); kk];
        let mut glogits = gnormed.clone();
        for (i, (gl, &l)) in glogits.data_mut().iter_mut().zip(tr.logits.data()).enumerate() {
            let k = (i / f_out) % kk;
            let inv = S::one() / (p.bn_var.data()[k] + eps).sqrt();
            let g = *gl;
            ggamma[k] += g * (l - p.bn_mean.data()[k]) * inv;
            gbeta[k] += g;
            *gl = g * p.bn_gamma.data()[k] * inv;
        }
        let gb = ops::conv2d_backward(&tr.pooled, &p.branch_kernel4(), &p.branch_spec(), &glogits)?;
        let t_in = tr.x.dims()[3];
        let norm = S::one() / S::of(t_in as f64);
        for (row, &gp) in gx.data_mut().chunks_exact_mut(t_in).zip(gb.input.data()) {
            row.iter_mut().for_each(|v| *v += gp * norm);
        }

        let mut params = vec![Tensor::new(p.basis_weight.dims().to_vec(), gbasis_w)?];
        if let Some(b) = &p.basis_bias {
            params.push(Tensor::new(b.dims().to_vec(), gbasis_b)?);
        }
        params.push(gb.weight.reshape(p.branch_weight.dims().to_vec())?);
        params.push(Tensor::new(vec![kk], ggamma)?);
        params.push(Tensor::new(vec![kk], gbeta)?);
        Ok(Gradients { input: gx, params })
    }

    fn params(&self) -> Vec<(&'static str, &Tensor<S>)> {
        let p = &self.params;
        let mut v = vec![("basis_weight", &p.basis_weight)];
        if let Some(b) = &p.basis_bias {
            v.push(("basis_bias", b));
        }
        v.push(("branch_weight", &p.branch_weight));
        v.push(("bn_gamma", &p.bn_gamma));
        v.push(("bn_beta", &p.bn_beta));
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<S>> {
        let p = &mut self.params;
        let mut v = vec![&mut p.basis_weight];
        v.extend(p.basis_bias.as_mut());
        v.push(&mut p.branch_weight);
        v.push(&mut p.bn_gamma);
        v.push(&mut p.bn_beta);
        v
    }
}

pub fn fdy_forward<S: Scalar>(x: &Tensor<S>, p: &FdyParams<S>) -> Result<Tensor<S>> {
    FdyConv { params: p.clone() }.forward(x)
}
