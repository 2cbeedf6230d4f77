//! Frequency and channel attention for CRNN sound event detection.
//!
//! The crate provides a small dense-tensor engine with analytic backward
//! passes, the squeeze-excitation family (SE, tSE, fwSE, tfwSE), C2D-Att and
//! frequency dynamic convolution, a config-driven CRNN host with parameter
//! auditing, the log-mel front end, augmentation transforms, and event-based
//! evaluation (collar F1 and PSDS).
//!
//! Numeric code is generic over [`Scalar`]; the aliases below fix the two
//! precisions used in practice: `f32` for inference and `f64` for gradient
//! checks.

pub mod attention;
pub mod augment;
pub mod bench;
pub mod error;
pub mod features;
pub mod gradcheck;
pub mod init;
pub mod layer;
pub mod metrics;
pub mod model;
pub mod ops;
pub mod scalar;
pub mod synth;
pub mod tensor;
pub mod tnsr;

pub use error::{Error, Result};
pub use layer::{Gradients, Layer};
pub use scalar::Scalar;
pub use tensor::Tensor;

pub type Tensor32 = Tensor<f32>;
pub type Tensor64 = Tensor<f64>;
