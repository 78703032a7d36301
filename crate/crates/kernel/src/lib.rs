//! Desk-scale diffusion numerics.
//!
//! - [`tensor`]: five-axis `(B, C, F, H, W)` tensors and their binary form
//! - [`schedule`]: linear beta schedules and cumulative alphas
//! - [`diffusion`]: forward noising, the noise-prediction loss, guidance, DDIM
//! - [`denoiser`]: the denoiser interface plus analytic test denoisers
//! - [`adapter`]: residual adapter stacks around spatial and temporal layers
//! - [`text_encoder`]: low-rank augmented text projection

pub mod adapter;
pub mod denoiser;
pub mod diffusion;
pub mod schedule;
pub mod tensor;
pub mod text_encoder;

use thiserror::Error;

pub use adapter::{AdapterStack, Activation, FeatureAxis};
pub use denoiser::{Denoiser, LinearDenoiser, PointMassDenoiser};
pub use schedule::{linear_beta_schedule, NoiseSchedule};
pub use tensor::Tensor5;
pub use text_encoder::TextEncoderAugment;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("invalid range: {0}")]
    InvalidRange(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("step {t} outside 0..={max}")]
    StepOutOfRange { t: usize, max: usize },
    #[error("step order violation: t_prev {t_prev} is after t {t}")]
    StepOrderViolation { t: usize, t_prev: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("frame axis has length {0}, expected 1")]
    FrameAxisNotSingleton(usize),
    #[error("non-finite value")]
    NonFinite,
    #[error("bad tensor encoding: {0}")]
    Format(String),
}
