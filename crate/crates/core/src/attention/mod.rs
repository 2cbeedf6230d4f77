//! Frequency and channel attention modules.

mod c2datt;
mod excite;
mod fdy;

use std::fmt;
use std::str::FromStr;

use rand::Rng;

pub use c2datt::{c2datt_forward, C2dAtt, C2dAttParams, C2dAttTrace};
pub use excite::{
    fwse_forward, se_forward, tfwse_forward, tse_forward, ExcitationParams, ExciteTrace, FwSeParams, SeParams,
    SqueezeExcite, SqueezeMode,
};
pub use fdy::{fdy_forward, FdyConv, FdyParams, FdyTrace};

pub mod defaults {
    pub use super::c2datt::{DEFAULT_HIDDEN as C2D_HIDDEN, DEFAULT_KERNEL as C2D_KERNEL};
    pub use super::fdy::{BRANCH_KERNEL as FDY_BRANCH_KERNEL, DEFAULT_BASIS as FDY_BASIS};
    pub const REDUCTION: usize = 4;
    pub const FDY_TEMPERATURE: f64 = 1.0;
}

use crate::error::{Error, Result};
use crate::layer::{Gradients, Layer};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// The model variants compared against the plain CRNN.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    Baseline,
    Fdy,
    Se,
    Tse,
    FwSe,
    TfwSe,
    C2dAtt,
    TfwSeThenSe,
    SeThenTfwSe,
}

impl Variant {
    /// All nine configurations in reporting order.
    pub const ALL: [Variant; 9] = [
        Variant::Baseline,
        Variant::Fdy,
        Variant::Se,
        Variant::Tse,
        Variant::FwSe,
        Variant::TfwSe,
        Variant::C2dAtt,
        Variant::TfwSeThenSe,
        Variant::SeThenTfwSe,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::Fdy => "fdy",
            Variant::Se => "se",
            Variant::Tse => "tse",
            Variant::FwSe => "fwse",
            Variant::TfwSe => "tfwse",
            Variant::C2dAtt => "c2datt",
            Variant::TfwSeThenSe => "tfwse+se",
            Variant::SeThenTfwSe => "se+tfwse",
        }
    }

    /// Attention stages inserted after the activation of a conv block, in order.
    pub fn stages(self) -> &'static [Stage] {
        match self {
            Variant::Baseline | Variant::Fdy => &[],
            Variant::Se => &[Stage::Excite(SqueezeMode::Channel)],
            Variant::Tse => &[Stage::Excite(SqueezeMode::ChannelPerFrame)],
            Variant::FwSe => &[Stage::Excite(SqueezeMode::Frequency)],
            Variant::TfwSe => &[Stage::Excite(SqueezeMode::FrequencyPerFrame)],
            Variant::C2dAtt => &[Stage::C2dAtt],
            Variant::TfwSeThenSe => {
                &[Stage::Excite(SqueezeMode::FrequencyPerFrame), Stage::Excite(SqueezeMode::Channel)]
            }
            Variant::SeThenTfwSe => {
                &[Stage::Excite(SqueezeMode::Channel), Stage::Excite(SqueezeMode::FrequencyPerFrame)]
            }
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .trim()
            .to_ascii_lowercase()
            .chars()
            .filter(|c| !matches!(c, '-' | '_' | ' '))
            .map(|c| if c == '>' { '+' } else { c })
            .collect();
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == key)
            .or(match key.as_str() {
                "none" => Some(Variant::Baseline),
                "fdyconv" => Some(Variant::Fdy),
                "c2d" => Some(Variant::C2dAtt),
                _ => None,
            })
            .ok_or_else(|| Error::config(format!("unknown attention variant {s:?}")))
    }
}

/// One attention module kind.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stage {
    Excite(SqueezeMode),
    C2dAtt,
}

/// Hyperparameters shared by every attach point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AttentionHyper {
    pub reduction: usize,
    pub c2d_hidden: usize,
    pub c2d_kernel: usize,
}

impl Default for AttentionHyper {
    fn default() -> Self {
        AttentionHyper {
            reduction: defaults::REDUCTION,
            c2d_hidden: defaults::C2D_HIDDEN,
            c2d_kernel: defaults::C2D_KERNEL,
        }
    }
}

impl Stage {
    /// Closed-form parameter count at a `(channels, freqs)` attach point.
    pub fn param_count(self, channels: usize, freqs: usize, hyper: &AttentionHyper) -> Result<usize> {
        match self {
            Stage::Excite(mode) => ExcitationParams::<f64>::count(mode.dim(channels, freqs), hyper.reduction),
            Stage::C2dAtt => Ok(C2dAttParams::<f64>::count(hyper.c2d_hidden, hyper.c2d_kernel)),
        }
    }

    pub fn build<S: Scalar, R: Rng + ?Sized>(
        self,
        channels: usize,
        freqs: usize,
        hyper: &AttentionHyper,
        rng: &mut R,
    ) -> Result<AttentionModule<S>> {
        Ok(match self {
            Stage::Excite(mode) => AttentionModule::Excite(SqueezeExcite::new(
                mode,
                ExcitationParams::init(mode.dim(channels, freqs), hyper.reduction, rng)?,
            )),
            Stage::C2dAtt => AttentionModule::C2d(C2dAtt {
                params: C2dAttParams::init(hyper.c2d_hidden, hyper.c2d_kernel, rng)?,
            }),
        })
    }
}

/// Any shape-preserving attention block.
#[derive(Clone, Debug, PartialEq)]
pub enum AttentionModule<S> {
    Excite(SqueezeExcite<S>),
    C2d(C2dAtt<S>),
}

#[derive(Clone, Debug)]
pub enum AttentionTrace<S> {
    Excite(ExciteTrace<S>),
    C2d(C2dAttTrace<S>),
}

impl<S: Scalar> AttentionModule<S> {
    pub fn stage(&self) -> Stage {
        match self {
            AttentionModule::Excite(m) => Stage::Excite(m.mode),
            AttentionModule::C2d(_) => Stage::C2dAtt,
        }
    }

    /// Replaces every parameter with zero; the block then scales by exactly 0.5.
    pub fn zero_params(&mut self) {
        for p in self.params_mut() {
            p.data_mut().iter_mut().for_each(|v| *v = S::zero());
        }
    }
}

impl<S: Scalar> Layer<S> for AttentionModule<S> {
    type Trace = AttentionTrace<S>;

    fn forward_traced(&self, x: &Tensor<S>) -> Result<(Tensor<S>, AttentionTrace<S>)> {
        match self {
            AttentionModule::Excite(m) => m.forward_traced(x).map(|(y, t)| (y, AttentionTrace::Excite(t))),
            AttentionModule::C2d(m) => m.forward_traced(x).map(|(y, t)| (y, AttentionTrace::C2d(t))),
        }
    }

    fn backward(&self, trace: &AttentionTrace<S>, gy: &Tensor<S>) -> Result<Gradients<S>> {
        match (self, trace) {
            (AttentionModule::Excite(m), AttentionTrace::Excite(t)) => m.backward(t, gy),
            (AttentionModule::C2d(m), AttentionTrace::C2d(t)) => m.backward(t, gy),
            _ => Err(Error::invalid("trace does not belong to this attention module")),
        }
    }

    fn params(&self) -> Vec<(&'static str, &Tensor<S>)> {
        match self {
            AttentionModule::Excite(m) => m.params(),
            AttentionModule::C2d(m) => m.params(),
        }
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<S>> {
        match self {
            AttentionModule::Excite(m) => m.params_mut(),
            AttentionModule::C2d(m) => m.params_mut(),
        }
    }
}

/// Attention blocks applied in series; an empty chain is the identity.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AttentionChain<S> {
    pub modules: Vec<AttentionModule<S>>,
}

impl<S: Scalar> AttentionChain<S> {
    pub fn new(modules: Vec<AttentionModule<S>>) -> Self {
        AttentionChain { modules }
    }

    /// Builds the stages of `variant` for one `(channels, freqs)` attach point.
    pub fn for_variant<R: Rng + ?Sized>(
        variant: Variant,
        channels: usize,
        freqs: usize,
        hyper: &AttentionHyper,
        rng: &mut R,
    ) -> Result<Self> {
        let modules = variant
            .stages()
            .iter()
            .map(|s| s.build(channels, freqs, hyper, rng))
            .collect::<Result<_>>()?;
        Ok(AttentionChain { modules })
    }

    pub fn is_empty(&self) -> bool {
        self.modules.is_empty()
    }
}

impl<S: Scalar> Layer<S> for AttentionChain<S> {
    type Trace = Vec<AttentionTrace<S>>;

    fn forward_traced(&self, x: &Tensor<S>) -> Result<(Tensor<S>, Self::Trace)> {
        let mut cur = x.clone();
        let mut traces = Vec::with_capacity(self.modules.len());
        for m in &self.modules {
            let (y, t) = m.forward_traced(&cur)?;
            if y.dims() != cur.dims() {
                return Err(Error::shape("attention block changed the feature-map shape"));
            }
            traces.push(t);
            cur = y;
        }
        Ok((cur, traces))
    }

    fn forward(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        let mut cur = x.clone();
        for m in &self.modules {
            cur = m.forward(&cur)?;
        }
        Ok(cur)
    }

    fn backward(&self, traces: &Self::Trace, gy: &Tensor<S>) -> Result<Gradients<S>> {
        if traces.len() != self.modules.len() {
            return Err(Error::invalid("chain trace length mismatch"));
        }
        let mut g = gy.clone();
        let mut per_module = Vec::with_capacity(self.modules.len());
        for (m, t) in self.modules.iter().zip(traces).rev() {
            let grads = m.backward(t, &g)?;
            g = grads.input;
            per_module.push(grads.params);
        }
        let params = per_module.into_iter().rev().flatten().collect();
        Ok(Gradients { input: g, params })
    }

    fn params(&self) -> Vec<(&'static str, &Tensor<S>)> {
        self.modules.iter().flat_map(|m| m.params()).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<S>> {
        self.modules.iter_mut().flat_map(|m| m.params_mut()).collect()
    }
}

/// Functional composition in list order.
pub fn chain<S: Scalar>(modules: &[AttentionModule<S>], x: &Tensor<S>) -> Result<Tensor<S>> {
    let mut cur = x.clone();
    for m in modules {
        let y = m.forward(&cur)?;
        if y.dims() != cur.dims() {
            return Err(Error::shape("attention block changed the feature-map shape"));
        }
        cur = y;
    }
    Ok(cur)
}

/// Attention parameter counts per attach point.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamBreakdown {
    pub per_point: Vec<usize>,
    pub total: usize,
}

/// Closed-form attention parameters added by `variant` over the given
/// `(channels, freqs)` attach points. FDY adds no post-activation module; its
/// cost lives in the replaced convolutions.
pub fn param_count(variant: Variant, attach_points: &[(usize, usize)], hyper: &AttentionHyper) -> Result<ParamBreakdown> {
    let per_point = attach_points
        .iter()
        .map(|&(c, f)| {
            variant
                .stages()
                .iter()
                .map(|s| s.param_count(c, f, hyper))
                .sum::<Result<usize>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let total = per_point.iter().sum();
    Ok(ParamBreakdown { per_point, total })
}
