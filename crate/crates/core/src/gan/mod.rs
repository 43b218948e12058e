//! Toy 2-D GAN with an EMA teacher and self-distillation generator loss.

pub mod data;
pub mod ema;
pub mod loss;
pub mod mlp;
pub mod train;

use thiserror::Error;

use crate::optim::OptimError;
use crate::tensor::TensorError;

pub use data::{DataKind, DataSpec};
pub use ema::{ema_update, EmaTracker};
pub use loss::{
    adversarial_losses, per_sample_sd, sd_loss, shared_augment, Affine2, SdKind, SdLossSpec,
};
pub use mlp::{Activation, Architecture, BoundMlp, Layer, MlpParams};
pub use train::{train_step, GanState, StepLog, TrainHyper};

#[derive(Debug, Error)]
pub enum GanError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error("non-finite {what} at step {step}")]
    Diverged { what: &'static str, step: u64 },
}
