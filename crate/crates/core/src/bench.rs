//! Forward-latency measurement across variants.

use std::time::{Duration, Instant};

use crate::attention::Variant;
use crate::error::{Error, Result};
use crate::init;
use crate::model::{build, ModelConfig};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub variant: Variant,
    pub median: Duration,
    /// `median / baseline median`; 1.0 when no baseline row was measured.
    pub ratio: f64,
}

pub fn median(mut samples: Vec<Duration>) -> Duration {
    samples.sort();
    samples[samples.len() / 2]
}

/// Median forward latency of each variant on one shared `[batch, 1, n_mels, frames]`
/// input, after one untimed warm-up pass.
pub fn bench_variants(
    base: &ModelConfig,
    variants: &[Variant],
    batch: usize,
    frames: usize,
    repeats: usize,
    seed: u64,
) -> Result<Vec<BenchRow>> {
    if repeats < 3 {
        return Err(Error::invalid(format!("repeats must be at least 3, got {repeats}")));
    }
    let x = Tensor::<f32>::random_uniform(vec![batch, 1, base.n_mels, frames], -1.0, 1.0, &mut init::rng(seed));
    let mut rows = Vec::with_capacity(variants.len());
    for &variant in variants {
        let model = build::<f32>(&ModelConfig { variant, ..base.clone() }, seed)?;
        model.forward(&x)?;
        let times = (0..repeats)
            .map(|_| {
                let t0 = Instant::now();
                model.forward(&x).map(|_| t0.elapsed())
            })
            .collect::<Result<Vec<_>>>()?;
        log::debug!("{variant}: {times:?}");
        rows.push(BenchRow { variant, median: median(times), ratio: 1.0 });
    }
    if let Some(base) = rows.iter().find(|r| r.variant == Variant::Baseline).map(|r| r.median) {
        for r in &mut rows {
            r.ratio = r.median.as_secs_f64() / base.as_secs_f64();
        }
    }
    Ok(rows)
}
