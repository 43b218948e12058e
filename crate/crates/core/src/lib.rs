//! Self-distillation laboratory for adversarial training.
//!
//! * [`tensor`], [`optim`], [`rng`]: a small reverse-mode autodiff engine
//!   and the optimizers and random streams the toy GAN needs.
//! * [`dirac`]: the Dirac-GAN with an EMA teacher, its Jacobian spectrum,
//!   Routh-Hurwitz classification and trajectory simulators.
//! * [`gan`]: 2-D toy GAN with the EMA self-distillation generator loss.
//! * [`metrics`]: Fréchet distances, mode coverage, checkpoint-trajectory
//!   variance and joint SD/discriminator ranking.
//! * [`harness`]: experiment configs, runs, checkpoints and file output
//!   behind the `sdgan` binary.

pub mod dirac;
pub mod gan;
#[cfg(feature = "harness")]
pub mod harness;
pub mod metrics;
pub mod optim;
pub mod rng;
pub mod tensor;
