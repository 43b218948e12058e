//! Experiment configuration: JSON, unknown keys rejected, defaults filled.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dirac::{DiracParams, DiracState, UpdateOrder};
use crate::gan::{
    Activation, Architecture, DataSpec, GanError, MlpParams, SdKind, SdLossSpec, TrainHyper,
};
use crate::rng::Rng;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {msg}")]
    Parse { path: String, msg: String },
    #[error("{path}: {msg}")]
    Range { path: String, msg: String },
}

fn range(path: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Range {
        path: path.to_string(),
        msg: msg.into(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    DiracStudy,
    Train,
    Finetune,
    Ablate,
    Rank,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SdConfig {
    pub kind: SdKind,
    pub alpha: f64,
    pub augment: bool,
    /// Seed of the frozen feature network used by the feature SD loss.
    pub feature_seed: u64,
    pub feature_widths: Vec<usize>,
}

impl Default for SdConfig {
    fn default() -> Self {
        Self {
            kind: SdKind::Feature,
            alpha: 1.0,
            augment: true,
            feature_seed: 1_000_003,
            feature_widths: vec![2, 64, 64, 16],
        }
    }
}

/// Frozen random network with the given seed and widths.
pub fn frozen_feature_net(seed: u64, widths: &[usize]) -> MlpParams {
    MlpParams::init(
        &Architecture::new(widths, Activation::Tanh),
        &mut Rng::seed(seed),
    )
}

impl SdConfig {
    pub fn feature_net(&self) -> MlpParams {
        frozen_feature_net(self.feature_seed, &self.feature_widths)
    }

    /// Runtime spec for `kind`/`augment`/`alpha`, attaching the feature net
    /// when needed.
    pub fn spec(&self, kind: SdKind, alpha: f64, augment: bool) -> Result<SdLossSpec, GanError> {
        let net = (kind == SdKind::Feature).then(|| self.feature_net());
        SdLossSpec::new(kind, alpha, augment, net)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiracStudyConfig {
    pub params: DiracParams,
    /// Discrete-play step size, used for both players.
    pub lr: f64,
    pub beta: f64,
    pub steps: usize,
    pub s0: DiracState,
    pub order: UpdateOrder,
    pub ode_t_end: f64,
    pub ode_dt: f64,
    pub sweep_alpha: Vec<f64>,
    pub sweep_eta_phi: Vec<f64>,
}

impl Default for DiracStudyConfig {
    fn default() -> Self {
        Self {
            params: DiracParams::default(),
            lr: 0.1,
            beta: 0.99,
            steps: 5000,
            s0: DiracState::new(1.0, 1.0, 1.0),
            order: UpdateOrder::Simultaneous,
            ode_t_end: 100.0,
            ode_dt: 1e-3,
            sweep_alpha: vec![0.0, 0.01, 0.1, 0.5, 1.0, 2.0],
            sweep_eta_phi: vec![0.001, 0.01, 0.1, 0.5],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub steps: u64,
    pub batch_size: usize,
    pub lr_g: f64,
    pub lr_d: f64,
    pub adam_betas: (f64, f64),
    pub beta_ema: f64,
    pub checkpoint_fractions: Vec<f64>,
    pub eval_interval: u64,
    pub eval_samples: usize,
    /// Latents per Table-3-style checkpoint trajectory.
    pub trajectory_latents: usize,
    pub trajectory_distance: SdKind,
    pub threshold_std: f64,
    pub metric_feature_seed: u64,
    pub generator_widths: Vec<usize>,
    pub discriminator_widths: Vec<usize>,
    pub latent_dim: usize,
    /// Write a checkpoint file at each checkpoint fraction.
    pub save_checkpoints: bool,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            steps: 20_000,
            batch_size: 128,
            lr_g: 1e-3,
            lr_d: 1e-3,
            adam_betas: (0.5, 0.999),
            beta_ema: 0.999,
            checkpoint_fractions: vec![0.2, 0.4, 0.6, 0.8, 1.0],
            eval_interval: 1000,
            eval_samples: 2000,
            trajectory_latents: 480,
            trajectory_distance: SdKind::Feature,
            threshold_std: 3.0,
            metric_feature_seed: 2_000_029,
            generator_widths: vec![2, 32, 32, 2],
            discriminator_widths: vec![2, 32, 32, 1],
            latent_dim: 2,
            save_checkpoints: true,
        }
    }
}

impl TrainingConfig {
    pub fn generator_arch(&self) -> Architecture {
        Architecture::new(&self.generator_widths, Activation::Tanh)
    }

    pub fn discriminator_arch(&self) -> Architecture {
        Architecture::new(&self.discriminator_widths, Activation::Tanh)
    }

    pub fn metric_net(&self) -> MlpParams {
        frozen_feature_net(self.metric_feature_seed, &[2, 64, 64, 16])
    }

    pub fn hyper(&self, data: &DataSpec) -> TrainHyper {
        TrainHyper {
            lr_g: self.lr_g,
            lr_d: self.lr_d,
            adam_betas: self.adam_betas,
            adam_eps: 1e-8,
            batch_size: self.batch_size,
            latent_dim: self.latent_dim,
            data_scale: data.scale(),
        }
    }

    /// Step numbers at which snapshots are taken.
    pub fn checkpoint_steps(&self) -> Vec<u64> {
        self.checkpoint_fractions
            .iter()
            .map(|f| ((f * self.steps as f64).round() as u64).clamp(1, self.steps))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AblationConfig {
    pub kinds: Vec<SdKind>,
    pub augment: Vec<bool>,
    pub include_baseline: bool,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self {
            kinds: vec![SdKind::L1, SdKind::L2, SdKind::Feature],
            augment: vec![true, false],
            include_baseline: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FinetuneConfig {
    pub checkpoint: Option<PathBuf>,
    /// Target distribution after warm start; `None` keeps `data`.
    pub data: Option<DataSpec>,
    /// Run the `alpha = 0` comparison cell alongside the SD cell.
    pub compare_baseline: bool,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        Self {
            checkpoint: None,
            data: None,
            compare_baseline: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RankConfig {
    pub checkpoint: Option<PathBuf>,
    pub n_latents: usize,
    /// First selection: largest and smallest SD distance.
    pub k_sd: usize,
    /// Second selection within each SD pool: highest and lowest D score.
    pub k_d: usize,
}

impl Default for RankConfig {
    fn default() -> Self {
        Self {
            checkpoint: None,
            n_latents: 10_000,
            k_sd: 200,
            k_d: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    #[serde(default)]
    pub data: DataSpec,
    #[serde(default)]
    pub sd: SdConfig,
    #[serde(default)]
    pub dirac: DiracStudyConfig,
    #[serde(default)]
    pub training: TrainingConfig,
    #[serde(default)]
    pub ablation: AblationConfig,
    #[serde(default)]
    pub finetune: FinetuneConfig,
    #[serde(default)]
    pub rank: RankConfig,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    pub fn with_mode(mode: Mode) -> Self {
        Self {
            mode,
            data: DataSpec::default(),
            sd: SdConfig::default(),
            dirac: DiracStudyConfig::default(),
            training: TrainingConfig::default(),
            ablation: AblationConfig::default(),
            finetune: FinetuneConfig::default(),
            rank: RankConfig::default(),
            seeds: default_seeds(),
            output_dir: default_output(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// First 16 hex digits of SHA-256 over the compact JSON rendering.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.seeds.is_empty() {
            return Err(range("seeds", "must be non-empty"));
        }
        let mut s = self.seeds.clone();
        s.sort_unstable();
        s.dedup();
        if s.len() != self.seeds.len() {
            return Err(range("seeds", "must be distinct"));
        }
        self.data
            .validate()
            .map_err(|e| range("data", e.to_string()))?;
        if let Some(d) = &self.finetune.data {
            d.validate()
                .map_err(|e| range("finetune.data", e.to_string()))?;
        }
        let sd = &self.sd;
        if !(sd.alpha >= 0.0 && sd.alpha.is_finite()) {
            return Err(range("sd.alpha", format!("must be >= 0, got {}", sd.alpha)));
        }
        if sd.feature_widths.len() < 2
            || sd.feature_widths[0] != 2
            || sd.feature_widths.contains(&0)
        {
            return Err(range(
                "sd.feature_widths",
                "must start at 2 and have positive widths",
            ));
        }

        let t = &self.training;
        if t.steps == 0 {
            return Err(range("training.steps", "must be > 0"));
        }
        if t.batch_size == 0 {
            return Err(range("training.batch_size", "must be > 0"));
        }
        for (name, v) in [("training.lr_g", t.lr_g), ("training.lr_d", t.lr_d)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(range(name, format!("must be > 0, got {v}")));
            }
        }
        let (b1, b2) = t.adam_betas;
        if !((0.0..1.0).contains(&b1) && (0.0..1.0).contains(&b2)) {
            return Err(range("training.adam_betas", "must lie in [0, 1)"));
        }
        if !(0.0..1.0).contains(&t.beta_ema) {
            return Err(range(
                "training.beta_ema",
                format!("must lie in [0, 1), got {}", t.beta_ema),
            ));
        }
        if t.checkpoint_fractions
            .iter()
            .any(|f| !(*f > 0.0 && *f <= 1.0))
            || t.checkpoint_fractions.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(range(
                "training.checkpoint_fractions",
                "must be increasing values in (0, 1]",
            ));
        }
        if t.eval_interval == 0 {
            return Err(range("training.eval_interval", "must be > 0"));
        }
        if t.eval_samples < 2 {
            return Err(range("training.eval_samples", "must be >= 2"));
        }
        if t.trajectory_latents == 0 {
            return Err(range("training.trajectory_latents", "must be > 0"));
        }
        if !(t.threshold_std > 0.0) {
            return Err(range("training.threshold_std", "must be > 0"));
        }
        if t.latent_dim == 0 {
            return Err(range("training.latent_dim", "must be > 0"));
        }
        let gw = &t.generator_widths;
        if gw.len() < 2 || gw[0] != t.latent_dim || gw[gw.len() - 1] != 2 || gw.contains(&0) {
            return Err(range(
                "training.generator_widths",
                "must map latent_dim to 2",
            ));
        }
        let dw = &t.discriminator_widths;
        if dw.len() < 2 || dw[0] != 2 || dw[dw.len() - 1] != 1 || dw.contains(&0) {
            return Err(range("training.discriminator_widths", "must map 2 to 1"));
        }

        if self.mode == Mode::DiracStudy {
            let d = &self.dirac;
            d.params
                .validate()
                .map_err(|e| range("dirac.params", e.to_string()))?;
            if !(d.lr > 0.0) {
                return Err(range("dirac.lr", "must be > 0"));
            }
            if !(0.0..1.0).contains(&d.beta) {
                return Err(range("dirac.beta", "must lie in [0, 1)"));
            }
            if d.steps == 0 {
                return Err(range("dirac.steps", "must be > 0"));
            }
            if !(d.ode_dt > 0.0 && d.ode_t_end > 0.0) {
                return Err(range("dirac.ode_dt", "dt and t_end must be > 0"));
            }
            if d.sweep_alpha.iter().any(|a| !(*a >= 0.0)) {
                return Err(range("dirac.sweep_alpha", "entries must be >= 0"));
            }
            if d.sweep_eta_phi.iter().any(|e| !(0.0..1.0).contains(e)) {
                return Err(range("dirac.sweep_eta_phi", "entries must lie in [0, 1)"));
            }
        }
        if self.mode == Mode::Ablate && self.ablation.augment.is_empty() {
            return Err(range("ablation.augment", "must be non-empty"));
        }
        if self.mode == Mode::Rank {
            let r = &self.rank;
            if r.k_d == 0 || r.k_sd < 2 * r.k_d || r.n_latents < 2 * r.k_sd {
                return Err(range(
                    "rank",
                    "need n_latents >= 2·k_sd and k_sd >= 2·k_d > 0",
                ));
            }
        }
        Ok(())
    }
}

/// Parses and validates a JSON config; errors name the offending path.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ExperimentConfig =
        serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Parse {
            path: e.path().to_string(),
            msg: e.inner().to_string(),
        })?;
    cfg.validate()?;
    Ok(cfg)
}
