use serde::{Deserialize, Serialize};

use super::mlp::MlpParams;
use super::GanError;

/// Shadow copy of a generator, updated as `shadow <- beta·shadow + (1-beta)·source`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmaTracker {
    pub beta: f64,
    pub shadow: MlpParams,
}

impl EmaTracker {
    pub fn new(beta: f64, source: &MlpParams) -> Result<Self, GanError> {
        Self::from_shadow(beta, source.clone())
    }

    pub fn from_shadow(beta: f64, shadow: MlpParams) -> Result<Self, GanError> {
        if !(0.0..1.0).contains(&beta) {
            return Err(GanError::Config(format!("ema beta {beta} outside [0, 1)")));
        }
        Ok(Self { beta, shadow })
    }

    pub fn update(&mut self, source: &MlpParams) -> Result<(), GanError> {
        ema_update(self, source)
    }
}

pub fn ema_update(tracker: &mut EmaTracker, source: &MlpParams) -> Result<(), GanError> {
    let beta = tracker.beta;
    let dst = tracker.shadow.tensors_mut();
    let src = source.tensors();
    if dst.len() != src.len() {
        return Err(GanError::Shape(format!(
            "ema: shadow has {} tensors, source has {}",
            dst.len(),
            src.len()
        )));
    }
    if let Some((i, (d, s))) = dst
        .iter()
        .zip(&src)
        .enumerate()
        .find(|(_, (d, s))| d.shape() != s.shape())
    {
        return Err(GanError::Shape(format!(
            "ema: tensor {i} shadow {:?} vs source {:?}",
            d.shape(),
            s.shape()
        )));
    }
    for (d, s) in dst.into_iter().zip(src) {
        for (w, &v) in d.data_mut().iter_mut().zip(s.data()) {
            *w = beta * *w + (1.0 - beta) * v;
        }
    }
    Ok(())
}
