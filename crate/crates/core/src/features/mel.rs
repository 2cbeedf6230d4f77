use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

use super::{F_MAX, LOG_OFFSET, N_BINS, N_FFT, N_MELS, SAMPLE_RATE};

const F_SP: f64 = 200.0 / 3.0;
const MIN_LOG_HZ: f64 = 1000.0;
const MIN_LOG_MEL: f64 = MIN_LOG_HZ / F_SP;

fn log_step() -> f64 {
    6.4f64.ln() / 27.0
}

/// Slaney mel scale: linear below 1 kHz, logarithmic above.
pub fn hz_to_mel(hz: f64) -> f64 {
    if hz < MIN_LOG_HZ {
        hz / F_SP
    } else {
        MIN_LOG_MEL + (hz / MIN_LOG_HZ).ln() / log_step()
    }
}

pub fn mel_to_hz(mel: f64) -> f64 {
    if mel < MIN_LOG_MEL {
        mel * F_SP
    } else {
        MIN_LOG_HZ * ((mel - MIN_LOG_MEL) * log_step()).exp()
    }
}

/// Filter edge frequencies: `n_mels + 2` points evenly spaced in mel.
pub fn mel_edges(n_mels: usize, f_min: f64, f_max: f64) -> Vec<f64> {
    let (lo, hi) = (hz_to_mel(f_min), hz_to_mel(f_max));
    (0..n_mels + 2)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (n_mels + 1) as f64))
        .collect()
}

/// Triangular filters `[n_mels, 1025]`, each scaled to unit area in Hz
/// (`2 / (f_hi − f_lo)` peak).
pub fn mel_filterbank(n_mels: usize, f_min: f64, f_max: f64) -> Vec<Vec<f64>> {
    let edges = mel_edges(n_mels, f_min, f_max);
    let bin_hz = |k: usize| k as f64 * SAMPLE_RATE as f64 / N_FFT as f64;
    (0..n_mels)
        .map(|m| {
            let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            let norm = 2.0 / (hi - lo);
            (0..N_BINS)
                .map(|k| {
                    let f = bin_hz(k);
                    let up = (f - lo) / (mid - lo);
                    let down = (hi - f) / (hi - mid);
                    up.min(down).max(0.0) * norm
                })
                .collect()
        })
        .collect()
}

/// `log(W · |X|² + 1e-10)` with the default 128-band, 0–8 kHz filterbank.
pub fn mel_project<S: Scalar>(mag: &Tensor<S>) -> Result<Tensor<S>> {
    let [bins, frames] = mag.dims2()?;
    if bins != N_BINS {
        return Err(Error::shape(format!("{bins} linear bins, expected {N_BINS}")));
    }
    let fb = mel_filterbank(N_MELS, 0.0, F_MAX);
    let power: Vec<f64> = mag.data().iter().map(|v| v.as_f64() * v.as_f64()).collect();
    let mut out = vec![S::zero(); N_MELS * frames];
    for (m, row) in fb.iter().enumerate() {
        let mut acc = vec![0.0f64; frames];
        for (k, &w) in row.iter().enumerate().filter(|(_, w)| **w > 0.0) {
            for (a, &p) in acc.iter_mut().zip(&power[k * frames..][..frames]) {
                *a += w * p;
            }
        }
        for (t, a) in acc.into_iter().enumerate() {
            out[m * frames + t] = S::of((a + LOG_OFFSET).ln());
        }
    }
    Tensor::new(vec![N_MELS, frames], out)
}
