//! Seeded training-time transforms and the mean-teacher weight update.
//!
//! Feature tensors put frequency second to last and time last
//! (`[B, C, F, T]` or `[F, T]`); frame labels are `[B, T, K]`.

use rand::seq::index;
use rand::Rng;
use rand_distr::{Beta, Distribution};

use crate::error::{Error, Result};
use crate::init;
use crate::model::ModelParams;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct AugmentConfig {
    /// Shape of the symmetric Beta distribution mixup draws λ from.
    pub mixup_alpha: f64,
    pub time_mask_min: usize,
    pub time_mask_max: usize,
    /// Inclusive band-count range for FilterAugment.
    pub filter_bands: (usize, usize),
    /// Inclusive gain range in dB.
    pub filter_db: (f64, f64),
    pub shift_max: usize,
    pub ema_decay: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            mixup_alpha: 0.2,
            time_mask_min: 5,
            time_mask_max: 20,
            filter_bands: (3, 6),
            filter_db: (-6.0, 6.0),
            shift_max: 90,
            ema_decay: 0.999,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mixup_alpha > 0.0 && self.mixup_alpha.is_finite()) {
            return Err(Error::config("mixup_alpha must be positive"));
        }
        if self.time_mask_min > self.time_mask_max {
            return Err(Error::config("time mask min width exceeds max width"));
        }
        if self.filter_bands.0 < 2 || self.filter_bands.0 > self.filter_bands.1 {
            return Err(Error::config("FilterAugment needs a band range starting at 2 or more"));
        }
        let (lo, hi) = self.filter_db;
        if !lo.is_finite() || !hi.is_finite() {
            return Err(Error::config("FilterAugment gain range must be finite"));
        }
        if lo > hi {
            return Err(Error::config(format!("FilterAugment gain range [{lo}, {hi}] dB is inverted")));
        }
        if !(0.0..=1.0).contains(&self.ema_decay) {
            return Err(Error::config("EMA decay must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// `λ ~ Beta(α, α)`.
pub fn sample_mixup_lambda(seed: u64, alpha: f64) -> Result<f64> {
    let beta = Beta::new(alpha, alpha).map_err(|e| Error::invalid(format!("mixup alpha {alpha}: {e}")))?;
    Ok(beta.sample(&mut init::rng(seed)))
}

/// Convex combination of two examples and their labels.
pub fn mixup<S: Scalar>(
    x1: &Tensor<S>,
    x2: &Tensor<S>,
    y1: &Tensor<S>,
    y2: &Tensor<S>,
    lambda: f64,
) -> Result<(Tensor<S>, Tensor<S>)> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::invalid(format!("mixup λ = {lambda} outside [0, 1]")));
    }
    let (a, b) = (S::of(lambda), S::of(1.0 - lambda));
    let mix = |p: &Tensor<S>, q: &Tensor<S>| p.zip_map(q, |u, v| a * u + b * v);
    Ok((mix(x1, x2)?, mix(y1, y2)?))
}

/// Frames `[start, start + width)` along the last axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MaskSpan {
    pub start: usize,
    pub width: usize,
}

/// The span [`time_mask`] draws for `frames` frames.
pub fn draw_mask_span(frames: usize, seed: u64, cfg: &AugmentConfig) -> MaskSpan {
    let mut rng = init::rng(seed);
    let max = cfg.time_mask_max.min(frames);
    let min = cfg.time_mask_min.min(max);
    let width = rng.gen_range(min..=max);
    let start = rng.gen_range(0..=frames - width);
    MaskSpan { start, width }
}

/// Replaces one contiguous run of frames with the mean of the whole input.
pub fn time_mask<S: Scalar>(x: &Tensor<S>, seed: u64, cfg: &AugmentConfig) -> Result<(Tensor<S>, MaskSpan)> {
    cfg.validate()?;
    let frames = *x.dims().last().ok_or_else(|| Error::shape("time_mask needs a time axis"))?;
    let span = draw_mask_span(frames, seed, cfg);
    let fill = x.mean();
    let mut out = x.clone();
    for row in out.data_mut().chunks_exact_mut(frames) {
        row[span.start..span.start + span.width].iter_mut().for_each(|v| *v = fill);
    }
    Ok((out, span))
}

/// Per-frequency gains in dB: `bands + 1` random anchor gains placed at
/// random band boundaries, linearly interpolated in between.
pub fn filter_gains_db<R: Rng + ?Sized>(freqs: usize, cfg: &AugmentConfig, rng: &mut R) -> Result<Vec<f64>> {
    let (bmin, bmax) = cfg.filter_bands;
    let bands = rng.gen_range(bmin..=bmax);
    if freqs < 2 || bands > freqs {
        return Err(Error::invalid(format!("cannot split {freqs} frequency bins into {bands} bands")));
    }
    let mut edges: Vec<usize> = index::sample(rng, freqs - 1, bands - 1).into_iter().map(|i| i + 1).collect();
    edges.sort_unstable();
    edges.insert(0, 0);
    edges.push(freqs - 1);
    let (lo, hi) = cfg.filter_db;
    let anchors: Vec<f64> = (0..=bands).map(|_| if lo == hi { lo } else { rng.gen_range(lo..=hi) }).collect();
    let mut gains = vec![0.0; freqs];
    for w in 0..bands {
        let (a, b) = (edges[w], edges[w + 1]);
        for (f, g) in gains.iter_mut().enumerate().take(b + 1).skip(a) {
            let t = if b == a { 0.0 } else { (f - a) as f64 / (b - a) as f64 };
            *g = anchors[w] + t * (anchors[w + 1] - anchors[w]);
        }
    }
    Ok(gains)
}

/// FilterAugment, linear variant. Each leading-axis item gets its own contour.
pub fn filter_augment<S: Scalar>(x: &Tensor<S>, seed: u64, cfg: &AugmentConfig) -> Result<Tensor<S>> {
    cfg.validate()?;
    let nd = x.ndim();
    if nd < 2 {
        return Err(Error::shape("filter_augment needs [..., F, T] input"));
    }
    let (f, t) = (x.dims()[nd - 2], x.dims()[nd - 1]);
    let items = if nd > 2 { x.dims()[0] } else { 1 };
    let per_item = x.len() / items;
    let mut rng = init::rng(seed);
    let mut out = x.clone();
    for chunk in out.data_mut().chunks_exact_mut(per_item) {
        let gains: Vec<S> = filter_gains_db(f, cfg, &mut rng)?
            .into_iter()
            .map(|db| S::of(10f64.powf(db / 20.0)))
            .collect();
        for (i, v) in chunk.iter_mut().enumerate() {
            *v *= gains[(i / t) % f];
        }
    }
    out.ensure_finite("filter_augment output")?;
    Ok(out)
}

/// Circularly shifts features (time last) and frame labels (`[B, T, K]`) by
/// the same number of frames.
pub fn frame_shift<S: Scalar>(x: &Tensor<S>, y: &Tensor<S>, shift: i64) -> Result<(Tensor<S>, Tensor<S>)> {
    let tx = *x.dims().last().ok_or_else(|| Error::shape("frame_shift needs a time axis"))?;
    let [_, ty, _] = y.dims3()?;
    if tx != ty {
        return Err(Error::shape(format!("features have {tx} frames, labels {ty}")));
    }
    Ok((x.roll(x.ndim() - 1, shift)?, y.roll(1, shift)?))
}

/// `t ← α·t + (1 − α)·s` for every scalar.
pub fn ema_update<S: Scalar>(teacher: &mut [&mut Tensor<S>], student: &[&Tensor<S>], alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!("EMA decay {alpha} outside [0, 1]")));
    }
    if teacher.len() != student.len() {
        return Err(Error::shape(format!("{} teacher tensors, {} student tensors", teacher.len(), student.len())));
    }
    for (t, s) in teacher.iter().zip(student) {
        t.check_same_dims(s)?;
    }
    let (a, b) = (S::of(alpha), S::of(1.0 - alpha));
    for (t, s) in teacher.iter_mut().zip(student) {
        t.data_mut().iter_mut().zip(s.data()).for_each(|(tv, &sv)| *tv = a * *tv + b * sv);
    }
    Ok(())
}

/// [`ema_update`] over every trainable tensor of two same-config models.
pub fn ema_update_model<S: Scalar>(teacher: &mut ModelParams<S>, student: &ModelParams<S>, alpha: f64) -> Result<()> {
    let student: Vec<&Tensor<S>> = student.named_parameters().into_iter().map(|(_, t)| t).collect();
    ema_update(&mut teacher.parameters_mut(), &student, alpha)
}
