//! Experiment runner behind the `sdgan` binary.

pub mod checkpoint;
pub mod config;
pub mod dirac_study;
pub mod output;
pub mod rank;
pub mod run;

use std::path::PathBuf;

use thiserror::Error;

use crate::gan::GanError;
use crate::metrics::MetricsError;

pub use checkpoint::{load_checkpoint, save_checkpoint, warm_start, Checkpoint, CheckpointError};
pub use config::{parse_config, ConfigError, ExperimentConfig, Mode};
pub use dirac_study::run_dirac_study;
pub use rank::{emit_rank_report, rank_latents};
pub use run::{run_finetune, run_training, training_cells, Cell, MetricRow, RunRecord, Summary};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Gan(#[from] GanError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("output directory {dir} belongs to config {found}, current config is {expected}")]
    ConfigMismatch {
        dir: PathBuf,
        found: String,
        expected: String,
    },
    #[error("every run diverged")]
    AllDiverged,
    #[error("{0}")]
    Usage(String),
}

impl HarnessError {
    /// 0 success, 1 config error, 2 divergence in all cells, 3 I/O error.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::AllDiverged => 2,
            HarnessError::Io { .. } => 3,
            HarnessError::Checkpoint(CheckpointError::Io { .. }) => 3,
            _ => 1,
        }
    }
}

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> HarnessError {
    let path = path.into();
    move |source| HarnessError::Io { path, source }
}
