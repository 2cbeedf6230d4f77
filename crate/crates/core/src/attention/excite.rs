//! Squeeze-and-excitation and its frequency-wise and per-frame variants.
//!
//! All four share the excitation `s = σ(W₂ δ(W₁ z))`; they differ in which
//! axes the squeeze averages over and therefore which axes the scale spans:
//!
//! | variant | squeeze pools | scale indexed by |
//! |---------|---------------|------------------|
//! | SE      | F, T          | (b, c)           |
//! | tSE     | F             | (b, c, t)        |
//! | fwSE    | C, T          | (b, f)           |
//! | tfwSE   | C             | (b, f, t)        |

use rand::Rng;

use crate::error::{Error, Result};
use crate::init;
use crate::layer::{Gradients, Layer};
use crate::ops;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Bias-free bottleneck `W₁: D → D/r`, `W₂: D/r → D`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExcitationParams<S> {
    /// `[D/r, D]`
    pub w1: Tensor<S>,
    /// `[D, D/r]`
    pub w2: Tensor<S>,
    pub reduction: usize,
}

/// Channel excitation used by SE and tSE.
pub type SeParams<S> = ExcitationParams<S>;
/// Frequency excitation used by fwSE and tfwSE.
pub type FwSeParams<S> = ExcitationParams<S>;

fn check_reduction(dim: usize, reduction: usize) -> Result<usize> {
    if reduction == 0 || dim % reduction != 0 || dim / reduction == 0 {
        return Err(Error::invalid(format!("reduction ratio {reduction} does not divide extent {dim}")));
    }
    Ok(dim / reduction)
}

impl<S: Scalar> ExcitationParams<S> {
    pub fn new(w1: Tensor<S>, w2: Tensor<S>, reduction: usize) -> Result<Self> {
        let [hidden, dim] = w1.dims2()?;
        if check_reduction(dim, reduction)? != hidden {
            return Err(Error::shape(format!("w1 {:?} inconsistent with reduction {reduction}", w1.dims())));
        }
        if w2.dims() != [dim, hidden] {
            return Err(Error::shape(format!("w2 {:?}, expected [{dim}, {hidden}]", w2.dims())));
        }
        Ok(ExcitationParams { w1, w2, reduction })
    }

    pub fn zeros(dim: usize, reduction: usize) -> Result<Self> {
        let hidden = check_reduction(dim, reduction)?;
        Ok(ExcitationParams {
            w1: Tensor::zeros(vec![hidden, dim]),
            w2: Tensor::zeros(vec![dim, hidden]),
            reduction,
        })
    }

    pub fn init<R: Rng + ?Sized>(dim: usize, reduction: usize, rng: &mut R) -> Result<Self> {
        let hidden = check_reduction(dim, reduction)?;
        Ok(ExcitationParams {
            w1: init::uniform(vec![hidden, dim], dim, rng),
            w2: init::uniform(vec![dim, hidden], hidden, rng),
            reduction,
        })
    }

    /// Extent `D` the excitation operates on.
    pub fn dim(&self) -> usize {
        self.w2.dims()[0]
    }

    /// Closed-form parameter count `2·D²/r`.
    pub fn count(dim: usize, reduction: usize) -> Result<usize> {
        Ok(2 * dim * check_reduction(dim, reduction)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SqueezeMode {
    /// SE: pool frequency and time, scale per channel.
    Channel,
    /// tSE: pool frequency, scale per channel and frame.
    ChannelPerFrame,
    /// fwSE: pool channel and time, scale per frequency bin.
    Frequency,
    /// tfwSE: pool channel, scale per frequency bin and frame.
    FrequencyPerFrame,
}

impl SqueezeMode {
    fn per_frame(self) -> bool {
        matches!(self, SqueezeMode::ChannelPerFrame | SqueezeMode::FrequencyPerFrame)
    }

    fn on_channels(self) -> bool {
        matches!(self, SqueezeMode::Channel | SqueezeMode::ChannelPerFrame)
    }

    /// Excitation extent for a `[B, C, F, T]` input.
    pub fn dim(self, channels: usize, freqs: usize) -> usize {
        if self.on_channels() {
            channels
        } else {
            freqs
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SqueezeMode::Channel => "se",
            SqueezeMode::ChannelPerFrame => "tse",
            SqueezeMode::Frequency => "fwse",
            SqueezeMode::FrequencyPerFrame => "tfwse",
        }
    }
}

/// Maps every input element onto its squeeze vector `n` and component `d`.
struct Layout {
    dims: [usize; 4],
    mode: SqueezeMode,
}

impl Layout {
    fn vectors(&self) -> usize {
        let [b, _, _, t] = self.dims;
        if self.mode.per_frame() {
            b * t
        } else {
            b
        }
    }

    fn dim(&self) -> usize {
        self.mode.dim(self.dims[1], self.dims[2])
    }

    /// Number of elements averaged into each squeezed component.
    fn pooled(&self) -> usize {
        let [_, c, f, t] = self.dims;
        match self.mode {
            SqueezeMode::Channel => f * t,
            SqueezeMode::ChannelPerFrame => f,
            SqueezeMode::Frequency => c * t,
            SqueezeMode::FrequencyPerFrame => c,
        }
    }

    /// Calls `visit(flat_input_index, squeeze_index)` for every input element.
    fn for_each(&self, mut visit: impl FnMut(usize, usize)) {
        let [b, c, f, t] = self.dims;
        let d = self.dim();
        let mut i = 0;
        for bi in 0..b {
            for ci in 0..c {
                for fi in 0..f {
                    for ti in 0..t {
                        let n = if self.mode.per_frame() { bi * t + ti } else { bi };
                        let k = if self.mode.on_channels() { ci } else { fi };
                        visit(i, n * d + k);
                        i += 1;
                    }
                }
            }
        }
    }
}

/// A squeeze-excitation attention block in one of the four [`SqueezeMode`]s.
#[derive(Clone, Debug, PartialEq)]
pub struct SqueezeExcite<S> {
    pub mode: SqueezeMode,
    pub params: ExcitationParams<S>,
}

#[derive(Clone, Debug)]
pub struct ExciteTrace<S> {
    x: Tensor<S>,
    z: Tensor<S>,
    hidden: Tensor<S>,
    scale: Tensor<S>,
}

impl<S: Scalar> ExciteTrace<S> {
    /// Attention weights, `[vectors, D]`.
    pub fn scale(&self) -> &Tensor<S> {
        &self.scale
    }

    /// Squeezed representation, `[vectors, D]`.
    pub fn squeezed(&self) -> &Tensor<S> {
        &self.z
    }
}

impl<S: Scalar> SqueezeExcite<S> {
    pub fn new(mode: SqueezeMode, params: ExcitationParams<S>) -> Self {
        SqueezeExcite { mode, params }
    }

    fn layout(&self, x: &Tensor<S>) -> Result<Layout> {
        let dims = x.dims4()?;
        let layout = Layout { dims, mode: self.mode };
        let want = layout.dim();
        if want % self.params.reduction != 0 {
            return Err(Error::invalid(format!(
                "reduction ratio {} does not divide extent {want}",
                self.params.reduction
            )));
        }
        if self.params.dim() != want {
            return Err(Error::shape(format!(
                "{} excitation sized for {} but input {:?} needs {want}",
                self.mode.name(),
                self.params.dim(),
                dims
            )));
        }
        Ok(layout)
    }

    /// Squeezed vectors `[vectors, D]`.
    pub fn squeeze(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        let layout = self.layout(x)?;
        Ok(squeeze(&layout, x))
    }
}

fn squeeze<S: Scalar>(layout: &Layout, x: &Tensor<S>) -> Tensor<S> {
    let mut z = Tensor::zeros(vec![layout.vectors(), layout.dim()]);
    let norm = S::one() / S::of(layout.pooled() as f64);
    {
        let (xd, zd) = (x.data(), z.data_mut());
        layout.for_each(|i, k| zd[k] += xd[i]);
        zd.iter_mut().for_each(|v| *v *= norm);
    }
    z
}

impl<S: Scalar> Layer<S> for SqueezeExcite<S> {
    type Trace = ExciteTrace<S>;

    fn forward_traced(&self, x: &Tensor<S>) -> Result<(Tensor<S>, ExciteTrace<S>)> {
        let layout = self.layout(x)?;
        let z = squeeze(&layout, x);
        let hidden = ops::linear(&z, &self.params.w1, None)?;
        let scale = ops::sigmoid(&ops::linear(&ops::relu(&hidden), &self.params.w2, None)?);
        let mut y = x.clone();
        {
            let (yd, sd) = (y.data_mut(), scale.data());
            layout.for_each(|i, k| yd[i] *= sd[k]);
        }
        Ok((y, ExciteTrace { x: x.clone(), z, hidden, scale }))
    }

    fn backward(&self, tr: &ExciteTrace<S>, gy: &Tensor<S>) -> Result<Gradients<S>> {
        tr.x.check_same_dims(gy)?;
        let layout = self.layout(&tr.x)?;
        let mut gscale = Tensor::zeros(tr.scale.dims().to_vec());
        let mut gx = gy.clone();
        {
            let (xd, gd, sd) = (tr.x.data(), gy.data(), tr.scale.data());
            let gs = gscale.data_mut();
            let gxd = gx.data_mut();
            layout.for_each(|i, k| {
                gs[k] += gd[i] * xd[i];
                gxd[i] = gd[i] * sd[k];
            });
        }
        let gu = ops::sigmoid_backward(&tr.scale, &gscale)?;
        let act = ops::relu(&tr.hidden);
        let g2 = ops::linear_backward(&act, &self.params.w2, &gu)?;
        let gh = ops::relu_backward(&tr.hidden, &g2.input)?;
        let g1 = ops::linear_backward(&tr.z, &self.params.w1, &gh)?;
        let norm = S::one() / S::of(layout.pooled() as f64);
        {
            let gz = g1.input.data();
            let gxd = gx.data_mut();
            layout.for_each(|i, k| gxd[i] += gz[k] * norm);
        }
        Ok(Gradients { input: gx, params: vec![g1.weight, g2.weight] })
    }

    fn params(&self) -> Vec<(&'static str, &Tensor<S>)> {
        vec![("w1", &self.params.w1), ("w2", &self.params.w2)]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<S>> {
        vec![&mut self.params.w1, &mut self.params.w2]
    }
}

/// Channel SE: `z_c` = mean over frequency and time.
pub fn se_forward<S: Scalar>(x: &Tensor<S>, p: &SeParams<S>) -> Result<Tensor<S>> {
    SqueezeExcite::new(SqueezeMode::Channel, p.clone()).forward(x)
}

/// Frame-wise SE: channel scales computed independently for every frame.
pub fn tse_forward<S: Scalar>(x: &Tensor<S>, p: &SeParams<S>) -> Result<Tensor<S>> {
    SqueezeExcite::new(SqueezeMode::ChannelPerFrame, p.clone()).forward(x)
}

/// Frequency-wise SE: `z_f` = mean over channel and time.
pub fn fwse_forward<S: Scalar>(x: &Tensor<S>, p: &FwSeParams<S>) -> Result<Tensor<S>> {
    SqueezeExcite::new(SqueezeMode::Frequency, p.clone()).forward(x)
}

/// Frame-wise frequency SE: `z_ft` = mean over channel, excitation shared across frames.
pub fn tfwse_forward<S: Scalar>(x: &Tensor<S>, p: &FwSeParams<S>) -> Result<Tensor<S>> {
    SqueezeExcite::new(SqueezeMode::FrequencyPerFrame, p.clone()).forward(x)
}
