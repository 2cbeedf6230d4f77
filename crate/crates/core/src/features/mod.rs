//! Audio front end: WAV I/O, STFT and log-mel projection.

mod mel;
mod stft;
mod wav;

pub use mel::{hz_to_mel, mel_edges, mel_filterbank, mel_project, mel_to_hz};
pub use stft::{frame_count, hamming, stft_magnitude};
pub use wav::{read_wav, write_wav, AudioClip};

use crate::error::Result;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const SAMPLE_RATE: u32 = 16_000;
pub const N_FFT: usize = 2048;
pub const HOP: usize = 256;
pub const N_BINS: usize = N_FFT / 2 + 1;
pub const N_MELS: usize = 128;
pub const F_MAX: f64 = 8000.0;
pub const LOG_OFFSET: f64 = 1e-10;

/// Seconds per STFT frame.
pub fn frame_seconds() -> f64 {
    HOP as f64 / SAMPLE_RATE as f64
}

/// `[128, T]` log-mel energies.
pub fn log_mel<S: Scalar>(clip: &AudioClip) -> Result<Tensor<S>> {
    mel_project(&stft_magnitude::<f64>(clip)?).map(|m| m.cast())
}

/// Stacks equally long `[128, T]` spectrograms into a `[B, 1, 128, T]` batch.
pub fn batch<S: Scalar>(mels: &[Tensor<S>]) -> Result<Tensor<S>> {
    let first = mels.first().ok_or_else(|| crate::Error::invalid("empty batch"))?;
    let [f, t] = first.dims2()?;
    let mut data = Vec::with_capacity(mels.len() * f * t);
    for m in mels {
        first.check_same_dims(m)?;
        data.extend_from_slice(m.data());
    }
    Tensor::new(vec![mels.len(), 1, f, t], data)
}
