use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::GanError;
use crate::rng::Rng;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataKind {
    RingOfGaussians,
    GridOfGaussians,
    SingleGaussian,
}

/// Isotropic 2-D Gaussian mixture with equal weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSpec {
    pub kind: DataKind,
    #[serde(default = "default_modes")]
    pub n_modes: usize,
    #[serde(default = "default_std")]
    pub mode_std: f64,
    /// Ring radius, or grid spacing.
    #[serde(default = "default_radius")]
    pub radius_or_spacing: f64,
}

fn default_modes() -> usize {
    8
}
fn default_std() -> f64 {
    0.05
}
fn default_radius() -> f64 {
    2.0
}

impl Default for DataSpec {
    fn default() -> Self {
        Self::ring(8, 2.0, 0.05)
    }
}

impl DataSpec {
    pub fn ring(n_modes: usize, radius: f64, mode_std: f64) -> Self {
        Self {
            kind: DataKind::RingOfGaussians,
            n_modes,
            mode_std,
            radius_or_spacing: radius,
        }
    }

    /// `n_modes` must be a perfect square; the grid is centred on the origin.
    pub fn grid(n_modes: usize, spacing: f64, mode_std: f64) -> Self {
        Self {
            kind: DataKind::GridOfGaussians,
            n_modes,
            mode_std,
            radius_or_spacing: spacing,
        }
    }

    pub fn validate(&self) -> Result<(), GanError> {
        if !(self.mode_std > 0.0 && self.mode_std.is_finite()) {
            return Err(GanError::Config(format!(
                "data.mode_std must be > 0, got {}",
                self.mode_std
            )));
        }
        if self.n_modes == 0 {
            return Err(GanError::Config("data.n_modes must be > 0".into()));
        }
        match self.kind {
            DataKind::SingleGaussian if self.n_modes != 1 => {
                return Err(GanError::Config(
                    "data.n_modes must be 1 for single_gaussian".into(),
                ))
            }
            DataKind::GridOfGaussians => {
                let side = (self.n_modes as f64).sqrt().round() as usize;
                if side * side != self.n_modes {
                    return Err(GanError::Config(format!(
                        "data.n_modes = {} is not a perfect square",
                        self.n_modes
                    )));
                }
            }
            _ => {}
        }
        if self.kind != DataKind::SingleGaussian && !(self.radius_or_spacing > 0.0) {
            return Err(GanError::Config(
                "data.radius_or_spacing must be > 0".into(),
            ));
        }
        Ok(())
    }

    pub fn means(&self) -> Vec<[f64; 2]> {
        match self.kind {
            DataKind::SingleGaussian => vec![[0.0, 0.0]],
            DataKind::RingOfGaussians => (0..self.n_modes)
                .map(|k| {
                    let a = TAU * k as f64 / self.n_modes as f64;
                    [
                        self.radius_or_spacing * a.cos(),
                        self.radius_or_spacing * a.sin(),
                    ]
                })
                .collect(),
            DataKind::GridOfGaussians => {
                let side = (self.n_modes as f64).sqrt().round() as usize;
                let off = (side as f64 - 1.0) / 2.0;
                (0..self.n_modes)
                    .map(|k| {
                        let (i, j) = (k / side, k % side);
                        [
                            (i as f64 - off) * self.radius_or_spacing,
                            (j as f64 - off) * self.radius_or_spacing,
                        ]
                    })
                    .collect()
            }
        }
    }

    /// Characteristic spatial extent, used to scale translations.
    pub fn scale(&self) -> f64 {
        self.means()
            .iter()
            .map(|m| m[0].hypot(m[1]))
            .fold(0.0, f64::max)
            .max(self.mode_std)
    }

    /// `[n, 2]` batch of samples.
    pub fn sample(&self, n: usize, rng: &mut Rng) -> Tensor {
        let means = self.means();
        let mut data = Vec::with_capacity(2 * n);
        for _ in 0..n {
            let m = means[rng.below(means.len())];
            data.push(m[0] + self.mode_std * rng.normal());
            data.push(m[1] + self.mode_std * rng.normal());
        }
        Tensor::raw(vec![n, 2], data)
    }
}
