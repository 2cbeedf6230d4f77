//! Seeded synthetic corpus: 10 s clips of class-specific tone bursts and
//! noise segments with exact labels on the model frame grid.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::Result;
use crate::features::{AudioClip, HOP, SAMPLE_RATE};
use crate::init;
use crate::metrics::{Event, EventList};
use crate::model::CLASSES;
use crate::tensor::Tensor;

pub const CLIP_SECONDS: f64 = 10.0;
/// Model output frames per clip (4 hops of 256 samples each).
pub const FRAMES: usize = 156;
pub const FRAME_HOPS: usize = 4;

pub fn frame_duration() -> f64 {
    (FRAME_HOPS * HOP) as f64 / SAMPLE_RATE as f64
}

/// Classes rendered as noise instead of harmonic tones.
const NOISY: [usize; 3] = [6, 7, 9];

fn base_frequency(class: usize) -> f64 {
    300.0 + 450.0 * class as f64
}

#[derive(Clone, Debug)]
pub struct SynthClip {
    pub clip_id: String,
    pub audio: AudioClip,
    pub labels: EventList,
}

/// Draws up to four non-overlapping-per-class events on the frame grid.
fn draw_events<R: Rng>(rng: &mut R) -> Vec<(usize, usize, usize)> {
    let mut spans: Vec<(usize, usize, usize)> = Vec::new();
    for _ in 0..rng.gen_range(1..=4) {
        let class = rng.gen_range(0..CLASSES.len());
        let len = rng.gen_range(5..=40);
        let start = rng.gen_range(0..=FRAMES - len);
        let clash = spans.iter().any(|&(c, s, e)| c == class && start <= e && s <= start + len);
        if !clash {
            spans.push((class, start, start + len));
        }
    }
    spans.sort_by_key(|&(c, s, _)| (s, c));
    spans
}

pub fn synth_clip(seed: u64, index: usize) -> Result<SynthClip> {
    let mut rng = init::rng(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ index as u64);
    let n = (CLIP_SECONDS * SAMPLE_RATE as f64) as usize;
    let mut samples: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.003..0.003)).collect();
    let spans = draw_events(&mut rng);
    let fd = frame_duration();
    let samples_per_frame = FRAME_HOPS * HOP;
    let ramp = 160;
    for &(class, s, e) in &spans {
        let (a, b) = (s * samples_per_frame, (e * samples_per_frame).min(n));
        let gain = rng.gen_range(0.1..0.25);
        let phase = rng.gen_range(0.0..2.0 * PI);
        let f0 = base_frequency(class);
        for (i, v) in samples[a..b].iter_mut().enumerate() {
            let env = (i.min(b - a - 1 - i) as f64 / ramp as f64).min(1.0);
            let t = (a + i) as f64 / SAMPLE_RATE as f64;
            let x = if NOISY.contains(&class) {
                rng.gen_range(-1.0..1.0)
            } else {
                (2.0 * PI * f0 * t + phase).sin() + 0.5 * (4.0 * PI * f0 * t + phase).sin()
            };
            *v += gain * env * x;
        }
    }
    let events = spans
        .iter()
        .map(|&(class, s, e)| Event { class, onset: s as f64 * fd, offset: e as f64 * fd })
        .collect();
    let clip_id = format!("synth_{index:04}.wav");
    let labels = EventList::new(clip_id.clone(), CLIP_SECONDS, events)?;
    let audio = AudioClip::new(samples.into_iter().map(|v| v.clamp(-1.0, 1.0) as f32).collect());
    Ok(SynthClip { clip_id, audio, labels })
}

pub fn synth_corpus(seed: u64, n_clips: usize) -> Result<Vec<SynthClip>> {
    (0..n_clips).map(|i| synth_clip(seed, i)).collect()
}

/// `[frames, K]` 0/1 activity of `labels` on a grid of `frame_dur` seconds.
pub fn indicator_probs(labels: &EventList, frames: usize, frame_dur: f64) -> Tensor<f32> {
    let k = CLASSES.len();
    let mut t = Tensor::zeros(vec![frames, k]);
    for e in &labels.events {
        let s = (e.onset / frame_dur).round() as usize;
        let end = ((e.offset / frame_dur).round() as usize).min(frames);
        for f in s..end {
            t.set(&[f, e.class], 1.0);
        }
    }
    t
}
