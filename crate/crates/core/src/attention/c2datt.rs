//! Joint channel-frequency attention from two small 2D convolutions over the
//! time-averaged `(channel, frequency)` map.

use rand::Rng;

use crate::error::{Error, Result};
use crate::init;
use crate::layer::{Conv2d, Gradients, Layer};
use crate::ops::{self, Conv2dSpec};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const DEFAULT_HIDDEN: usize = 8;
pub const DEFAULT_KERNEL: usize = 3;

/// `conv1: 1 → H`, ReLU, `conv2: H → 1`, sigmoid; both `k×k`, same padding, with bias.
#[derive(Clone, Debug, PartialEq)]
pub struct C2dAttParams<S> {
    pub conv1: Conv2d<S>,
    pub conv2: Conv2d<S>,
}

fn specs(hidden: usize, kernel: usize) -> Result<(Conv2dSpec, Conv2dSpec)> {
    if hidden == 0 {
        return Err(Error::invalid("C2D-Att needs at least one hidden channel"));
    }
    if kernel == 0 || kernel % 2 == 0 {
        return Err(Error::invalid(format!("C2D-Att kernel must be odd, got {kernel}")));
    }
    Ok((Conv2dSpec::same(1, hidden, kernel), Conv2dSpec::same(hidden, 1, kernel)))
}

impl<S: Scalar> C2dAttParams<S> {
    pub fn zeros(hidden: usize, kernel: usize) -> Result<Self> {
        let (s1, s2) = specs(hidden, kernel)?;
        let conv = |s: Conv2dSpec| Conv2d {
            spec: s,
            weight: Tensor::zeros(s.weight_dims().to_vec()),
            bias: Some(Tensor::zeros(vec![s.out_channels])),
        };
        Ok(C2dAttParams { conv1: conv(s1), conv2: conv(s2) })
    }

    pub fn init<R: Rng + ?Sized>(hidden: usize, kernel: usize, rng: &mut R) -> Result<Self> {
        let (s1, s2) = specs(hidden, kernel)?;
        let mut conv = |s: Conv2dSpec| {
            let fan_in = s.in_channels * s.kernel_h * s.kernel_w;
            Conv2d {
                spec: s,
                weight: init::uniform(s.weight_dims().to_vec(), fan_in, rng),
                bias: Some(init::uniform(vec![s.out_channels], fan_in, rng)),
            }
        };
        let conv1 = conv(s1);
        let conv2 = conv(s2);
        Ok(C2dAttParams { conv1, conv2 })
    }

    pub fn hidden(&self) -> usize {
        self.conv1.spec.out_channels
    }

    pub fn kernel(&self) -> usize {
        self.conv1.spec.kernel_h
    }

    /// Closed form `2·H·k² + H + 1`.
    pub fn count(hidden: usize, kernel: usize) -> usize {
        let taps = kernel * kernel;
        hidden * taps + hidden + hidden * taps + 1
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct C2dAtt<S> {
    pub params: C2dAttParams<S>,
}

#[derive(Clone, Debug)]
pub struct C2dAttTrace<S> {
    x: Tensor<S>,
    /// Time-mean map `[B, 1, C, F]`.
    map: Tensor<S>,
    hidden: Tensor<S>,
    scale: Tensor<S>,
}

impl<S: Scalar> C2dAttTrace<S> {
    /// Attention map `[B, 1, C, F]`.
    pub fn scale(&self) -> &Tensor<S> {
        &self.scale
    }
}

fn time_mean<S: Scalar>(x: &Tensor<S>) -> Result<Tensor<S>> {
    let [b, c, f, t] = x.dims4()?;
    let norm = S::one() / S::of(t as f64);
    let data = x.data().chunks_exact(t).map(|row| row.iter().copied().sum::<S>() * norm).collect();
    Tensor::new(vec![b, 1, c, f], data)
}

impl<S: Scalar> Layer<S> for C2dAtt<S> {
    type Trace = C2dAttTrace<S>;

    fn forward_traced(&self, x: &Tensor<S>) -> Result<(Tensor<S>, C2dAttTrace<S>)> {
        let [_, c, f, t] = x.dims4()?;
        if c == 0 || f == 0 {
            return Err(Error::shape("C2D-Att needs non-empty channel and frequency axes"));
        }
        let map = time_mean(x)?;
        let hidden = self.params.conv1.forward(&map)?;
        let scale = ops::sigmoid(&self.params.conv2.forward(&ops::relu(&hidden))?);
        let mut y = x.clone();
        for (row, &s) in y.data_mut().chunks_exact_mut(t).zip(scale.data()) {
            row.iter_mut().for_each(|v| *v *= s);
        }
        Ok((y, C2dAttTrace { x: x.clone(), map, hidden, scale }))
    }

    fn backward(&self, tr: &C2dAttTrace<S>, gy: &Tensor<S>) -> Result<Gradients<S>> {
        tr.x.check_same_dims(gy)?;
        let t = tr.x.dims()[3];
        let mut gx = gy.clone();
        let mut gscale = Tensor::zeros(tr.scale.dims().to_vec());
        for (((gxr, xr), gr), (gs, &s)) in gx
            .data_mut()
            .chunks_exact_mut(t)
            .zip(tr.x.data().chunks_exact(t))
            .zip(gy.data().chunks_exact(t))
            .zip(gscale.data_mut().iter_mut().zip(tr.scale.data()))
        {
            *gs = xr.iter().zip(gr).map(|(&a, &b)| a * b).sum();
            gxr.iter_mut().for_each(|v| *v *= s);
        }
        let gu = ops::sigmoid_backward(&tr.scale, &gscale)?;
        let act = ops::relu(&tr.hidden);
        let g2 = self.params.conv2.backward(&act, &gu)?;
        let gh = ops::relu_backward(&tr.hidden, &g2.input)?;
        let g1 = self.params.conv1.backward(&tr.map, &gh)?;
        let norm = S::one() / S::of(t as f64);
        for (gxr, &gm) in gx.data_mut().chunks_exact_mut(t).zip(g1.input.data()) {
            gxr.iter_mut().for_each(|v| *v += gm * norm);
        }
        let mut params = g1.params;
        params.extend(g2.params);
        Ok(Gradients { input: gx, params })
    }

    fn params(&self) -> Vec<(&'static str, &Tensor<S>)> {
        let p = &self.params;
        vec![
            ("conv1.weight", &p.conv1.weight),
            ("conv1.bias", p.conv1.bias.as_ref().expect("C2D-Att convs carry bias")),
            ("conv2.weight", &p.conv2.weight),
            ("conv2.bias", p.conv2.bias.as_ref().expect("C2D-Att convs carry bias")),
        ]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<S>> {
        let p = &mut self.params;
        let mut v = p.conv1.params_mut();
        v.extend(p.conv2.params_mut());
        v
    }
}

pub fn c2datt_forward<S: Scalar>(x: &Tensor<S>, p: &C2dAttParams<S>) -> Result<Tensor<S>> {
    C2dAtt { params: p.clone() }.forward(x)
}
