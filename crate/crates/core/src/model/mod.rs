//! Convolutional recurrent network for frame-level event detection.

mod audit;
mod config;
mod crnn;
mod gru;

pub use audit::{audit_all, audit_checks, param_audit, reference, AuditCheck, CostReport};
pub use config::{AttachPoint, BlockActivation, ModelConfig, CLASSES};
pub use crnn::{build, context_gate, BatchNorm, BlockConv, BlockTap, ConvBlock, ModelOutput, ModelParams};
pub use gru::{bigru_forward, BiGru, BiGruLayer, GruCell};
