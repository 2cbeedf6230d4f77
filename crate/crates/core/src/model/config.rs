//! Declarative CRNN description and its `key=value` text form.

use std::fmt;
use std::str::FromStr;

use crate::attention::{defaults, AttentionHyper, Variant};
use crate::error::{Error, Result};

/// Nonlinearity closing each conv block (after batch-norm).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockActivation {
    /// `x ⊙ σ(W x + b)` with `W: C → C` applied per time-frequency cell.
    ContextGating,
    Relu,
}

impl BlockActivation {
    pub fn name(self) -> &'static str {
        match self {
            BlockActivation::ContextGating => "cg",
            BlockActivation::Relu => "relu",
        }
    }
}

impl FromStr for BlockActivation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cg" | "context_gating" | "gating" => Ok(BlockActivation::ContextGating),
            "relu" => Ok(BlockActivation::Relu),
            other => Err(Error::config(format!("unknown activation {other:?}"))),
        }
    }
}

/// The ten target classes, in output-index order.
pub const CLASSES: [&str; 10] = [
    "Alarm_bell_ringing",
    "Blender",
    "Cat",
    "Dishes",
    "Dog",
    "Electric_shaver_toothbrush",
    "Frying",
    "Running_water",
    "Speech",
    "Vacuum_cleaner",
];

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub n_mels: usize,
    pub channels: Vec<usize>,
    /// `(frequency, time)` pooling per conv block.
    pub pooling: Vec<(usize, usize)>,
    pub kernel: usize,
    pub activation: BlockActivation,
    pub gru_hidden: usize,
    pub gru_layers: usize,
    pub n_classes: usize,
    pub variant: Variant,
    pub attention: AttentionHyper,
    pub fdy_basis: usize,
    pub fdy_temperature: f64,
    /// Training-time only; inference ignores it.
    pub dropout: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            n_mels: 128,
            channels: vec![32, 64, 128, 256, 256, 256, 256],
            pooling: vec![(2, 2), (2, 2), (2, 1), (2, 1), (2, 1), (2, 1), (2, 1)],
            kernel: 3,
            activation: BlockActivation::ContextGating,
            gru_hidden: 256,
            gru_layers: 2,
            n_classes: CLASSES.len(),
            variant: Variant::Baseline,
            attention: AttentionHyper::default(),
            fdy_basis: defaults::FDY_BASIS,
            fdy_temperature: defaults::FDY_TEMPERATURE,
            dropout: 0.5,
        }
    }
}

/// A conv block that receives attention modules.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AttachPoint {
    pub layer: usize,
    pub channels: usize,
    pub freqs: usize,
}

impl ModelConfig {
    pub fn with_variant(variant: Variant) -> Self {
        ModelConfig { variant, ..Default::default() }
    }

    /// Small widths for tests: seven 2-channel blocks and a 4-unit GRU.
    pub fn tiny() -> Self {
        ModelConfig {
            channels: vec![2; 7],
            gru_hidden: 4,
            attention: AttentionHyper { reduction: 1, c2d_hidden: 2, ..Default::default() },
            ..Default::default()
        }
    }

    pub fn blocks(&self) -> usize {
        self.channels.len()
    }

    pub fn in_channels(&self, layer: usize) -> usize {
        if layer == 0 {
            1
        } else {
            self.channels[layer - 1]
        }
    }

    /// Frequency extent entering each block, plus the extent after the last pool.
    pub fn freq_extents(&self) -> Vec<usize> {
        let mut f = self.n_mels;
        let mut out = vec![f];
        for &(pf, _) in &self.pooling {
            f = if pf == 0 { 0 } else { f / pf };
            out.push(f);
        }
        out
    }

    /// Total time downsampling factor.
    pub fn time_reduction(&self) -> usize {
        self.pooling.iter().map(|&(_, pt)| pt).product()
    }

    /// Output frames for `frames` input frames (floor at every pool).
    pub fn output_frames(&self, frames: usize) -> usize {
        self.pooling.iter().fold(frames, |t, &(_, pt)| t / pt.max(1))
    }

    /// Every block except the last carries attention.
    pub fn attach_points(&self) -> Vec<AttachPoint> {
        let freqs = self.freq_extents();
        (0..self.blocks().saturating_sub(1))
            .map(|layer| AttachPoint { layer, channels: self.channels[layer], freqs: freqs[layer] })
            .collect()
    }

    /// Dynamic convolution replaces every conv except the first.
    pub fn uses_fdy(&self, layer: usize) -> bool {
        self.variant == Variant::Fdy && layer > 0
    }

    /// Size of the per-frame vector fed to the recurrent stack.
    pub fn gru_input(&self) -> usize {
        self.channels.last().copied().unwrap_or(0) * self.freq_extents().last().copied().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_mels == 0 {
            return Err(Error::config("n_mels must be positive"));
        }
        if self.channels.is_empty() || self.channels.len() != self.pooling.len() {
            return Err(Error::config(format!(
                "{} channel entries but {} pooling entries",
                self.channels.len(),
                self.pooling.len()
            )));
        }
        if self.channels.iter().any(|&c| c == 0) {
            return Err(Error::config("channel counts must be positive"));
        }
        if self.pooling.iter().any(|&(f, t)| f == 0 || t == 0) {
            return Err(Error::config("pool sizes must be positive"));
        }
        if self.kernel == 0 || self.kernel % 2 == 0 {
            return Err(Error::config(format!("conv kernel must be odd, got {}", self.kernel)));
        }
        let freqs = self.freq_extents();
        if freqs[..freqs.len() - 1].iter().any(|&f| f == 0) {
            return Err(Error::config("pooling plan shrinks the frequency axis to zero"));
        }
        if *freqs.last().expect("non-empty") != 1 {
            return Err(Error::config(format!(
                "pooling plan leaves frequency extent {} at the recurrent input, expected 1",
                freqs.last().expect("non-empty")
            )));
        }
        if self.gru_hidden == 0 || self.gru_layers == 0 || self.n_classes == 0 {
            return Err(Error::config("gru_hidden, gru_layers and n_classes must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::config(format!("dropout must lie in [0, 1), got {}", self.dropout)));
        }
        if self.variant == Variant::Fdy {
            if self.fdy_basis == 0 {
                return Err(Error::config("fdy_basis must be positive"));
            }
            if !(self.fdy_temperature > 0.0) || !self.fdy_temperature.is_finite() {
                return Err(Error::config("fdy_temperature must be positive"));
            }
        }
        for p in self.attach_points() {
            for stage in self.variant.stages() {
                stage
                    .param_count(p.channels, p.freqs, &self.attention)
                    .map_err(|e| Error::config(format!("block {}: {e}", p.layer)))?;
            }
        }
        if self.variant.stages().contains(&crate::attention::Stage::C2dAtt)
            && (self.attention.c2d_hidden == 0 || self.attention.c2d_kernel % 2 == 0)
        {
            return Err(Error::config("C2D-Att needs hidden ≥ 1 and an odd kernel"));
        }
        Ok(())
    }

    /// Parses the `key=value` form; missing keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ModelConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}: expected key=value", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |what: &str| Error::config(format!("line {}: bad {what} {value:?}", lineno + 1));
            let num = |v: &str| v.trim().parse::<usize>().map_err(|_| bad(key));
            match key {
                "n_mels" => cfg.n_mels = num(value)?,
                "channels" => cfg.channels = value.split(',').map(num).collect::<Result<_>>()?,
                "pooling" => {
                    cfg.pooling = value
                        .split(',')
                        .map(|p| {
                            let (f, t) = p.trim().split_once('x').ok_or_else(|| bad("pooling"))?;
                            Ok((num(f)?, num(t)?))
                        })
                        .collect::<Result<_>>()?
                }
                "kernel" => cfg.kernel = num(value)?,
                "activation" => cfg.activation = value.parse()?,
                "gru_hidden" => cfg.gru_hidden = num(value)?,
                "gru_layers" => cfg.gru_layers = num(value)?,
                "n_classes" => cfg.n_classes = num(value)?,
                "attention" => cfg.variant = value.parse()?,
                "reduction" => cfg.attention.reduction = num(value)?,
                "c2d_hidden" => cfg.attention.c2d_hidden = num(value)?,
                "c2d_kernel" => cfg.attention.c2d_kernel = num(value)?,
                "fdy_basis" => cfg.fdy_basis = num(value)?,
                "fdy_temperature" => cfg.fdy_temperature = value.parse().map_err(|_| bad(key))?,
                "dropout" => cfg.dropout = value.parse().map_err(|_| bad(key))?,
                other => return Err(Error::config(format!("line {}: unknown key {other:?}", lineno + 1))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl fmt::Display for ModelConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: Vec<String>| v.join(",");
        writeln!(f, "n_mels={}", self.n_mels)?;
        writeln!(f, "channels={}", join(self.channels.iter().map(|c| c.to_string()).collect()))?;
        writeln!(f, "pooling={}", join(self.pooling.iter().map(|(a, b)| format!("{a}x{b}")).collect()))?;
        writeln!(f, "kernel={}", self.kernel)?;
        writeln!(f, "activation={}", self.activation.name())?;
        writeln!(f, "gru_hidden={}", self.gru_hidden)?;
        writeln!(f, "gru_layers={}", self.gru_layers)?;
        writeln!(f, "n_classes={}", self.n_classes)?;
        writeln!(f, "attention={}", self.variant)?;
        writeln!(f, "reduction={}", self.attention.reduction)?;
        writeln!(f, "c2d_hidden={}", self.attention.c2d_hidden)?;
        writeln!(f, "c2d_kernel={}", self.attention.c2d_kernel)?;
        writeln!(f, "fdy_basis={}", self.fdy_basis)?;
        writeln!(f, "fdy_temperature={}", self.fdy_temperature)?;
        writeln!(f, "dropout={}", self.dropout)
    }
}
