use std::f64::consts::PI;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

use super::{AudioClip, HOP, N_BINS, N_FFT, SAMPLE_RATE};

/// Periodic Hamming window.
pub fn hamming(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.54 - 0.46 * (2.0 * PI * i as f64 / n as f64).cos()).collect()
}

/// Maps a possibly out-of-range index onto `0..n` by mirror reflection
/// without repeating the edge sample, repeating as often as needed.
fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

pub fn frame_count(len: usize) -> usize {
    len / HOP + 1
}

/// `[1025, T]` magnitudes of centered, Hamming-windowed 2048-point frames.
pub fn stft_magnitude<S: Scalar>(clip: &AudioClip) -> Result<Tensor<S>> {
    if clip.sample_rate != SAMPLE_RATE {
        return Err(Error::invalid(format!("sample rate {} Hz, expected {SAMPLE_RATE}", clip.sample_rate)));
    }
    if clip.samples.is_empty() {
        return Err(Error::invalid("empty signal"));
    }
    if clip.samples.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("audio samples".into()));
    }
    let n = clip.samples.len();
    let frames = frame_count(n);
    let window = hamming(N_FFT);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(N_FFT);
    let half = (N_FFT / 2) as isize;
    let columns: Vec<Vec<f64>> = (0..frames)
        .into_par_iter()
        .map(|t| {
            let start = (t * HOP) as isize - half;
            let mut buf: Vec<Complex<f64>> = (0..N_FFT)
                .map(|k| Complex::new(clip.samples[reflect(start + k as isize, n)] as f64 * window[k], 0.0))
                .collect();
            fft.process(&mut buf);
            buf[..N_BINS].iter().map(|c| c.norm()).collect()
        })
        .collect();
    let mut data = vec![S::zero(); N_BINS * frames];
    for (t, col) in columns.iter().enumerate() {
        for (k, &v) in col.iter().enumerate() {
            data[k * frames + t] = S::of(v);
        }
    }
    Tensor::new(vec![N_BINS, frames], data)
}
