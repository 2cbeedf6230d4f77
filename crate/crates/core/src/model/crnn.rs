//! Instantiated CRNN: conv blocks, recurrent stack and the two heads.

use std::path::Path;

use rayon::prelude::*;

use crate::attention::{AttentionChain, FdyConv, FdyParams};
use crate::error::{Error, Result};
use crate::init::{self, ParamRng};
use crate::layer::{Conv2d, Layer, Linear};
use crate::ops::{self, sigmoid_scalar, Conv2dSpec};
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use crate::tnsr;

use super::config::{BlockActivation, ModelConfig};
use super::gru::{bigru_forward, BiGru, BiGruLayer};

#[derive(Clone, Debug, PartialEq)]
pub enum BlockConv<S> {
    Plain(Conv2d<S>),
    Fdy(FdyConv<S>),
}

impl<S: Scalar> BlockConv<S> {
    pub fn forward(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        match self {
            BlockConv::Plain(c) => c.forward(x),
            BlockConv::Fdy(c) => c.forward(x),
        }
    }

    fn params(&self) -> Vec<(&'static str, &Tensor<S>)> {
        match self {
            BlockConv::Plain(c) => c.params(),
            BlockConv::Fdy(c) => c.params(),
        }
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor<S>> {
        match self {
            BlockConv::Plain(c) => c.params_mut(),
            BlockConv::Fdy(c) => c.params_mut(),
        }
    }
}

/// Inference batch-norm: `γ, β` are trained, the running statistics are buffers.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchNorm<S> {
    pub gamma: Tensor<S>,
    pub beta: Tensor<S>,
    pub running_mean: Tensor<S>,
    pub running_var: Tensor<S>,
}

impl<S: Scalar> BatchNorm<S> {
    pub fn identity(channels: usize) -> Self {
        BatchNorm {
            gamma: Tensor::full(vec![channels], S::one()),
            beta: Tensor::zeros(vec![channels]),
            running_mean: Tensor::zeros(vec![channels]),
            running_var: Tensor::full(vec![channels], S::one()),
        }
    }

    pub fn forward(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        ops::batchnorm_infer(x, &self.gamma, &self.beta, &self.running_mean, &self.running_var)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvBlock<S> {
    pub conv: BlockConv<S>,
    pub bn: BatchNorm<S>,
    /// Context-gating projection `[C, C]` with bias; `None` for ReLU blocks.
    pub gate: Option<Linear<S>>,
    pub attention: AttentionChain<S>,
    pub pool: (usize, usize),
}

/// `y = x ⊙ σ(W x + b)` mixing channels at every `(f, t)` cell.
pub fn context_gate<S: Scalar>(x: &Tensor<S>, gate: &Linear<S>) -> Result<Tensor<S>> {
    let [b, c, f, t] = x.dims4()?;
    if gate.weight.dims() != [c, c] {
        return Err(Error::shape(format!("gate weight {:?} for {c} channels", gate.weight.dims())));
    }
    let plane = f * t;
    let xd = x.data();
    let wd = gate.weight.data();
    let bias = gate.bias.as_ref().map(|t| t.data());
    let mut out = vec![S::zero(); x.len()];
    out.par_chunks_mut(plane).enumerate().for_each(|(idx, dst)| {
        let (bi, o) = (idx / c, idx % c);
        let b0 = bias.map_or(S::zero(), |bd| bd[o]);
        let mut acc = vec![b0; plane];
        for ci in 0..c {
            let wv = wd[o * c + ci];
            let src = &xd[(bi * c + ci) * plane..][..plane];
            acc.iter_mut().zip(src).for_each(|(a, &v)| *a += wv * v);
        }
        let own = &xd[idx * plane..][..plane];
        for ((d, a), &v) in dst.iter_mut().zip(&acc).zip(own) {
            *d = v * sigmoid_scalar(*a);
        }
    });
    Tensor::new(vec![b, c, f, t], out)
}

impl<S: Scalar> ConvBlock<S> {
    /// Conv → BN → activation. Returns the attention input.
    pub fn pre_attention(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        let h = self.bn.forward(&self.conv.forward(x)?)?;
        match &self.gate {
            Some(g) => context_gate(&h, g),
            None => Ok(ops::relu(&h)),
        }
    }

    pub fn pool(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        ops::avg_pool2d(x, self.pool.0, self.pool.1)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<S> {
    pub config: ModelConfig,
    pub blocks: Vec<ConvBlock<S>>,
    pub gru: BiGru<S>,
    /// Frame-level classifier, `[K, 2H]`.
    pub strong: Linear<S>,
    /// Time-attention logits for the clip-level head, `[K, 2H]`.
    pub weak: Linear<S>,
}

fn linear_init<S: Scalar>(dout: usize, din: usize, rng: &mut ParamRng) -> Linear<S> {
    Linear { weight: init::uniform(vec![dout, din], din, rng), bias: Some(init::uniform(vec![dout], din, rng)) }
}

/// Instantiates `config` with weights drawn from a ChaCha stream seeded by `seed`.
pub fn build<S: Scalar>(config: &ModelConfig, seed: u64) -> Result<ModelParams<S>> {
    config.validate()?;
    let mut rng = init::rng(seed);
    let freqs = config.freq_extents();
    let n = config.blocks();
    let mut blocks = Vec::with_capacity(n);
    for layer in 0..n {
        let cout = config.channels[layer];
        let spec = Conv2dSpec::same(config.in_channels(layer), cout, config.kernel);
        let conv = if config.uses_fdy(layer) {
            BlockConv::Fdy(FdyConv {
                params: FdyParams::init(spec, config.fdy_basis, config.fdy_temperature, &mut rng)?,
            })
        } else {
            let fan_in = spec.in_channels * spec.kernel_h * spec.kernel_w;
            BlockConv::Plain(Conv2d {
                spec,
                weight: init::uniform(spec.weight_dims().to_vec(), fan_in, &mut rng),
                bias: Some(init::uniform(vec![cout], fan_in, &mut rng)),
            })
        };
        let gate = match config.activation {
            BlockActivation::ContextGating => Some(linear_init(cout, cout, &mut rng)),
            BlockActivation::Relu => None,
        };
        let attention = if layer + 1 < n {
            AttentionChain::for_variant(config.variant, cout, freqs[layer], &config.attention, &mut rng)?
        } else {
            AttentionChain::default()
        };
        blocks.push(ConvBlock { conv, bn: BatchNorm::identity(cout), gate, attention, pool: config.pooling[layer] });
    }
    let gru = BiGru::init(config.gru_input(), config.gru_hidden, config.gru_layers, &mut rng);
    let strong = linear_init(config.n_classes, 2 * config.gru_hidden, &mut rng);
    let weak = linear_init(config.n_classes, 2 * config.gru_hidden, &mut rng);
    Ok(ModelParams { config: config.clone(), blocks, gru, strong, weak })
}

/// Frame-level and clip-level class probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelOutput<S> {
    /// `[B, T', K]`
    pub strong: Tensor<S>,
    /// `[B, K]`
    pub weak: Tensor<S>,
    /// Softmax-over-time pooling weights, `[B, T', K]`.
    pub weak_weights: Tensor<S>,
}

/// Activations either side of a block's attention chain.
#[derive(Clone, Debug)]
pub struct BlockTap<S> {
    pub pre_attention: Tensor<S>,
    pub post_attention: Tensor<S>,
}

impl<S: Scalar> ModelParams<S> {
    fn check_input(&self, mel: &Tensor<S>) -> Result<()> {
        let [_, c, f, t] = mel.dims4()?;
        if c != 1 || f != self.config.n_mels {
            return Err(Error::shape(format!(
                "model expects [B, 1, {}, T] log-mel input, got {:?}",
                self.config.n_mels,
                mel.dims()
            )));
        }
        if self.config.output_frames(t) == 0 {
            return Err(Error::shape(format!(
                "{t} frames is shorter than the time pooling factor {}",
                self.config.time_reduction()
            )));
        }
        mel.ensure_finite("model input")
    }

    fn conv_stack(&self, mel: &Tensor<S>, mut taps: Option<&mut Vec<BlockTap<S>>>) -> Result<Tensor<S>> {
        self.check_input(mel)?;
        let mut x = mel.clone();
        for block in &self.blocks {
            let pre = block.pre_attention(&x)?;
            let post = block.attention.forward(&pre)?;
            x = block.pool(&post)?;
            if let Some(t) = taps.as_deref_mut() {
                t.push(BlockTap { pre_attention: pre, post_attention: post });
            }
        }
        Ok(x)
    }

    /// Conv features rearranged to `[B, T', C·F]` for the recurrent stack.
    pub fn embed(&self, mel: &Tensor<S>) -> Result<Tensor<S>> {
        to_sequence(&self.conv_stack(mel, None)?)
    }

    pub fn forward(&self, mel: &Tensor<S>) -> Result<ModelOutput<S>> {
        let seq = to_sequence(&self.conv_stack(mel, None)?)?;
        self.heads(&seq)
    }

    pub fn forward_with_taps(&self, mel: &Tensor<S>) -> Result<(ModelOutput<S>, Vec<BlockTap<S>>)> {
        let mut taps = Vec::with_capacity(self.blocks.len());
        let seq = to_sequence(&self.conv_stack(mel, Some(&mut taps))?)?;
        Ok((self.heads(&seq)?, taps))
    }

    fn heads(&self, seq: &Tensor<S>) -> Result<ModelOutput<S>> {
        let h = bigru_forward(&self.gru, seq)?;
        let strong = ops::sigmoid(&self.strong.forward(&h)?);
        let weak_weights = ops::softmax(&self.weak.forward(&h)?, 1, S::one())?;
        let [b, t, k] = strong.dims3()?;
        let mut weak = vec![S::zero(); b * k];
        for bi in 0..b {
            for ti in 0..t {
                for ki in 0..k {
                    let i = (bi * t + ti) * k + ki;
                    weak[bi * k + ki] += weak_weights.data()[i] * strong.data()[i];
                }
            }
        }
        let weak = Tensor::new(vec![b, k], weak)?.map(|v| v.max(S::zero()).min(S::one()));
        let out = ModelOutput { strong, weak, weak_weights };
        out.strong.ensure_finite("strong output")?;
        out.weak.ensure_finite("weak output")?;
        Ok(out)
    }

    /// Trainable tensors in a fixed order with dotted names.
    pub fn named_parameters(&self) -> Vec<(String, &Tensor<S>)> {
        let mut out = Vec::new();
        for (i, block) in self.blocks.iter().enumerate() {
            for (name, t) in block.conv.params() {
                out.push((format!("block{i}.conv.{name}"), t));
            }
            out.push((format!("block{i}.bn.gamma"), &block.bn.gamma));
            out.push((format!("block{i}.bn.beta"), &block.bn.beta));
            if let Some(g) = &block.gate {
                for (name, t) in g.params() {
                    out.push((format!("block{i}.gate.{name}"), t));
                }
            }
            for (j, m) in block.attention.modules.iter().enumerate() {
                for (name, t) in m.params() {
                    out.push((format!("block{i}.att{j}.{name}"), t));
                }
            }
        }
        for (l, layer) in self.gru.layers.iter().enumerate() {
            for (dir, cell) in [("fwd", &layer.forward), ("bwd", &layer.backward)] {
                for (name, t) in cell.params() {
                    out.push((format!("gru.l{l}.{dir}.{name}"), t));
                }
            }
        }
        for (head, lin) in [("strong", &self.strong), ("weak", &self.weak)] {
            for (name, t) in lin.params() {
                out.push((format!("{head}.{name}"), t));
            }
        }
        out
    }

    /// Same order as [`named_parameters`](Self::named_parameters).
    pub fn parameters_mut(&mut self) -> Vec<&mut Tensor<S>> {
        let mut out: Vec<&mut Tensor<S>> = Vec::new();
        for block in &mut self.blocks {
            out.extend(block.conv.params_mut());
            out.push(&mut block.bn.gamma);
            out.push(&mut block.bn.beta);
            if let Some(g) = &mut block.gate {
                out.extend(g.params_mut());
            }
            out.extend(block.attention.params_mut());
        }
        for layer in &mut self.gru.layers {
            let BiGruLayer { forward, backward } = layer;
            out.extend(forward.params_mut());
            out.extend(backward.params_mut());
        }
        out.extend(self.strong.params_mut());
        out.extend(self.weak.params_mut());
        out
    }

    /// Normalization statistics: stored with the weights, never trained.
    pub fn named_buffers(&self) -> Vec<(String, &Tensor<S>)> {
        let mut out = Vec::new();
        for (i, block) in self.blocks.iter().enumerate() {
            if let BlockConv::Fdy(f) = &block.conv {
                out.push((format!("block{i}.conv.bn_mean"), &f.params.bn_mean));
                out.push((format!("block{i}.conv.bn_var"), &f.params.bn_var));
            }
            out.push((format!("block{i}.bn.running_mean"), &block.bn.running_mean));
            out.push((format!("block{i}.bn.running_var"), &block.bn.running_var));
        }
        out
    }

    fn buffers_mut(&mut self) -> Vec<&mut Tensor<S>> {
        let mut out: Vec<&mut Tensor<S>> = Vec::new();
        for block in &mut self.blocks {
            if let BlockConv::Fdy(f) = &mut block.conv {
                out.push(&mut f.params.bn_mean);
                out.push(&mut f.params.bn_var);
            }
            out.push(&mut block.bn.running_mean);
            out.push(&mut block.bn.running_var);
        }
        out
    }

    /// Number of trainable scalars actually allocated.
    pub fn enumerate_parameters(&self) -> usize {
        self.named_parameters().iter().map(|(_, t)| t.len()).sum()
    }

    /// Writes `<stem>.tnsr` and `<stem>.manifest` with parameters then buffers.
    pub fn save(&self, stem: impl AsRef<Path>) -> Result<()> {
        let mut entries = self.named_parameters();
        entries.extend(self.named_buffers());
        tnsr::save_bundle(stem, &entries)
    }

    /// Loads weights written by [`save`](Self::save) for the given config.
    /// Every tensor must be present with the expected shape.
    pub fn load(config: &ModelConfig, stem: impl AsRef<Path>) -> Result<Self> {
        let mut model = build::<S>(config, 0)?;
        let mut stored: std::collections::HashMap<String, Tensor<S>> =
            tnsr::load_bundle(stem)?.into_iter().collect();
        let names: Vec<String> = model
            .named_parameters()
            .into_iter()
            .chain(model.named_buffers())
            .map(|(n, _)| n)
            .collect();
        let mut slots = model.parameters_mut();
        let n_params = slots.len();
        for (name, slot) in names[..n_params].iter().zip(slots.iter_mut()) {
            fill(slot, name, &mut stored)?;
        }
        for (name, slot) in names[n_params..].iter().zip(model.buffers_mut()) {
            fill(slot, name, &mut stored)?;
        }
        if let Some(extra) = stored.keys().min() {
            return Err(Error::config(format!("weights contain {extra:?}, which the config does not use")));
        }
        Ok(model)
    }
}

fn fill<S: Scalar>(
    slot: &mut Tensor<S>,
    name: &str,
    stored: &mut std::collections::HashMap<String, Tensor<S>>,
) -> Result<()> {
    let t = stored
        .remove(name)
        .ok_or_else(|| Error::config(format!("weights are missing {name:?}")))?;
    if t.dims() != slot.dims() {
        return Err(Error::config(format!("{name}: stored {:?}, config expects {:?}", t.dims(), slot.dims())));
    }
    *slot = t;
    Ok(())
}

/// `[B, C, F, T] → [B, T, C·F]`.
fn to_sequence<S: Scalar>(x: &Tensor<S>) -> Result<Tensor<S>> {
    let [b, c, f, t] = x.dims4()?;
    let d = c * f;
    let mut out = vec![S::zero(); b * t * d];
    for bi in 0..b {
        for ci in 0..c {
            for fi in 0..f {
                for ti in 0..t {
                    out[(bi * t + ti) * d + ci * f + fi] = x.data()[((bi * c + ci) * f + fi) * t + ti];
                }
            }
        }
    }
    Tensor::new(vec![b, t, d], out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attention::Variant;

    #[test]
    fn names_line_up_with_mutable_order() {
        let cfg = ModelConfig { variant: Variant::Fdy, ..ModelConfig::tiny() };
        let mut m = build::<f64>(&cfg, 1).unwrap();
        let dims: Vec<Vec<usize>> = m.named_parameters().iter().map(|(_, t)| t.dims().to_vec()).collect();
        let mut_dims: Vec<Vec<usize>> = m.parameters_mut().iter().map(|t| t.dims().to_vec()).collect();
        assert_eq!(dims, mut_dims);
        let names: Vec<String> = m.named_parameters().into_iter().map(|(n, _)| n).collect();
        let unique: std::collections::BTreeSet<_> = names.iter().collect();
        assert_eq!(unique.len(), names.len());
    }

    #[test]
    fn tiny_forward_shapes_and_ranges() {
        let m = build::<f32>(&ModelConfig::tiny(), 3).unwrap();
        let x = Tensor::zeros(vec![2, 1, 128, 40]);
        let out = m.forward(&x).unwrap();
        assert_eq!(out.strong.dims(), &[2, 10, 10]);
        assert_eq!(out.weak.dims(), &[2, 10]);
        assert!(out.strong.data().iter().chain(out.weak.data()).all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn wrong_mel_count_is_rejected() {
        let m = build::<f32>(&ModelConfig::tiny(), 3).unwrap();
        assert!(matches!(m.forward(&Tensor::zeros(vec![1, 1, 64, 40])), Err(Error::Shape(_))));
        assert!(matches!(m.forward(&Tensor::zeros(vec![1, 1, 128, 3])), Err(Error::Shape(_))));
    }
}
