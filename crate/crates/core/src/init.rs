//! Seeded parameter initialization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub type ParamRng = ChaCha8Rng;

pub fn rng(seed: u64) -> ParamRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `uniform(−a, a)` with `a = sqrt(1 / fan_in)`.
pub fn uniform<S: Scalar, R: Rng + ?Sized>(dims: impl Into<Vec<usize>>, fan_in: usize, rng: &mut R) -> Tensor<S> {
    let a = (1.0 / fan_in.max(1) as f64).sqrt();
    Tensor::from_fn(dims, |_| S::of(rng.gen_range(-a..a)))
}
