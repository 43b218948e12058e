//! JSON checkpoints with bit-exact parameter round trips.
//!
//! Floats are written in shortest round-trip form and parsed with exact
//! rounding, so save -> load -> save reproduces the file byte for byte.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gan::{Architecture, GanState, Layer, MlpParams, TrainHyper};
use crate::optim::Adam;
use crate::rng::Rng;
use crate::tensor::Tensor;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint version {found} is not supported (this build reads version {supported})")]
    Version { found: u64, supported: u32 },
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
    #[error("shape mismatch in {net} layer {layer}: {msg}")]
    Shape {
        net: String,
        layer: usize,
        msg: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerDoc {
    /// `[in][out]` rows.
    pub weight: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchitectureDoc {
    pub generator: Architecture,
    pub discriminator: Architecture,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerDoc {
    pub generator: Adam,
    pub discriminator: Adam,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub version: u32,
    pub config_hash: String,
    pub architecture: ArchitectureDoc,
    pub generator: Vec<LayerDoc>,
    pub discriminator: Vec<LayerDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ema: Option<Vec<LayerDoc>>,
    pub ema_beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<OptimizerDoc>,
    pub rng: Rng,
    pub aug_rng: Rng,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub step: u64,
}

fn to_docs(net: &MlpParams) -> Vec<LayerDoc> {
    net.layers
        .iter()
        .map(|l| {
            let cols = l.weight.shape()[1];
            LayerDoc {
                weight: l.weight.data().chunks(cols).map(<[f64]>::to_vec).collect(),
                bias: l.bias.data().to_vec(),
            }
        })
        .collect()
}

fn from_docs(
    name: &str,
    docs: &[LayerDoc],
    arch: &Architecture,
) -> Result<MlpParams, CheckpointError> {
    let expected = arch.widths.len().saturating_sub(1);
    if docs.len() != expected {
        return Err(CheckpointError::Shape {
            net: name.into(),
            layer: docs.len().min(expected),
            msg: format!("expected {expected} layers, found {}", docs.len()),
        });
    }
    let mut layers = Vec::with_capacity(docs.len());
    for (i, (doc, w)) in docs.iter().zip(arch.widths.windows(2)).enumerate() {
        let shape_err = |msg: String| CheckpointError::Shape {
            net: name.into(),
            layer: i,
            msg,
        };
        let (fan_in, fan_out) = (w[0], w[1]);
        if doc.weight.len() != fan_in || doc.weight.iter().any(|r| r.len() != fan_out) {
            return Err(shape_err(format!(
                "weight should be {fan_in}x{fan_out}, found {}x{}",
                doc.weight.len(),
                doc.weight.first().map_or(0, Vec::len)
            )));
        }
        if doc.bias.len() != fan_out {
            return Err(shape_err(format!(
                "bias should have {fan_out} entries, found {}",
                doc.bias.len()
            )));
        }
        let weight = Tensor::from_rows(&doc.weight).map_err(|e| shape_err(e.to_string()))?;
        let bias = Tensor::from_vec(doc.bias.clone()).map_err(|e| shape_err(e.to_string()))?;
        layers.push(Layer { weight, bias });
    }
    Ok(MlpParams {
        layers,
        activation: arch.activation,
    })
}

impl Checkpoint {
    pub fn from_state(state: &GanState, config_hash: &str, with_optimizer: bool) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            config_hash: config_hash.to_string(),
            architecture: ArchitectureDoc {
                generator: state.generator.architecture(),
                discriminator: state.discriminator.architecture(),
            },
            generator: to_docs(&state.generator),
            discriminator: to_docs(&state.discriminator),
            ema: Some(to_docs(&state.ema.shadow)),
            ema_beta: state.ema.beta,
            optimizer: with_optimizer.then(|| OptimizerDoc {
                generator: state.opt_g.clone(),
                discriminator: state.opt_d.clone(),
            }),
            rng: state.rng.clone(),
            aug_rng: state.aug_rng.clone(),
            seed: Some(state.seed),
            step: state.step,
        }
    }

    pub fn generator(&self) -> Result<MlpParams, CheckpointError> {
        from_docs("generator", &self.generator, &self.architecture.generator)
    }

    pub fn discriminator(&self) -> Result<MlpParams, CheckpointError> {
        from_docs(
            "discriminator",
            &self.discriminator,
            &self.architecture.discriminator,
        )
    }

    /// The stored EMA weights, or a copy of the generator when absent.
    pub fn ema_shadow(&self) -> Result<MlpParams, CheckpointError> {
        match &self.ema {
            Some(docs) => from_docs("ema", docs, &self.architecture.generator),
            None => self.generator(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("checkpoint serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, CheckpointError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CheckpointError::Malformed(e.to_string()))?;
        let found = value
            .get("version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| CheckpointError::Malformed("missing integer field `version`".into()))?;
        if found != u64::from(CHECKPOINT_VERSION) {
            return Err(CheckpointError::Version {
                found,
                supported: CHECKPOINT_VERSION,
            });
        }
        let ckpt: Checkpoint =
            serde_json::from_str(text).map_err(|e| CheckpointError::Malformed(e.to_string()))?;
        ckpt.generator()?;
        ckpt.discriminator()?;
        ckpt.ema_shadow()?;
        if !(0.0..1.0).contains(&ckpt.ema_beta) {
            return Err(CheckpointError::Malformed(format!(
                "ema_beta {} outside [0, 1)",
                ckpt.ema_beta
            )));
        }
        Ok(ckpt)
    }
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<(), CheckpointError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| CheckpointError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, ckpt.to_json()).map_err(|source| CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let text = fs::read_to_string(path).map_err(|source| CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Checkpoint::from_json(&text)
}

/// Restores generator, discriminator and EMA teacher from a checkpoint for
/// continued training, checking them against the configured architectures.
/// Optimizer state and step counter carry over when present. The stored
/// random streams resume when `seed` is the checkpoint's own seed, so the
/// run continues exactly; any other seed re-derives fresh streams.
pub fn warm_start(
    ckpt: &Checkpoint,
    g_arch: &Architecture,
    d_arch: &Architecture,
    ema_beta: f64,
    hyper: &TrainHyper,
    seed: u64,
) -> Result<GanState, CheckpointError> {
    for (net, want, got) in [
        ("generator", g_arch, &ckpt.architecture.generator),
        ("discriminator", d_arch, &ckpt.architecture.discriminator),
    ] {
        if want != got {
            let layer = want
                .widths
                .iter()
                .zip(&got.widths)
                .position(|(a, b)| a != b)
                .unwrap_or(want.widths.len().min(got.widths.len()))
                .saturating_sub(1);
            return Err(CheckpointError::Shape {
                net: net.into(),
                layer,
                msg: format!(
                    "configured widths {:?}, checkpoint has {:?}",
                    want.widths, got.widths
                ),
            });
        }
    }
    let mut state = GanState::from_parts(
        ckpt.generator()?,
        ckpt.discriminator()?,
        Some(ckpt.ema_shadow()?),
        ema_beta,
        hyper,
        seed,
    )
    .map_err(|e| CheckpointError::Malformed(e.to_string()))?;
    if let Some(opt) = &ckpt.optimizer {
        state.opt_g = opt.generator.clone();
        state.opt_d = opt.discriminator.clone();
        state.opt_g.lr = hyper.lr_g;
        state.opt_d.lr = hyper.lr_d;
    }
    if ckpt.seed == Some(seed) {
        state.rng = ckpt.rng.clone();
        state.aug_rng = ckpt.aug_rng.clone();
    }
    state.step = ckpt.step;
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gan::{train_step, Activation, DataSpec};

    fn trained_state() -> (GanState, TrainHyper) {
        let hyper = TrainHyper {
            batch_size: 16,
            ..TrainHyper::default()
        };
        let g = Architecture::new(&[2, 8, 2], Activation::Tanh);
        let d = Architecture::new(&[2, 8, 1], Activation::Tanh);
        let mut st = GanState::new(&g, &d, 0.9, &hyper, 5).unwrap();
        let data = DataSpec::default();
        for _ in 0..3 {
            let b = data.sample(16, &mut st.rng);
            train_step(&mut st, &b, None, &hyper).unwrap();
        }
        (st, hyper)
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let (st, _) = trained_state();
        let ck = Checkpoint::from_state(&st, "abc", true);
        let text = ck.to_json();
        let back = Checkpoint::from_json(&text).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.to_json(), text);
        assert_eq!(back.generator().unwrap(), st.generator);
        assert_eq!(back.ema_shadow().unwrap(), st.ema.shadow);
    }

    #[test]
    fn missing_ema_falls_back_to_generator() {
        let (st, hyper) = trained_state();
        let mut ck = Checkpoint::from_state(&st, "abc", false);
        ck.ema = None;
        let ck = Checkpoint::from_json(&ck.to_json()).unwrap();
        let ws = warm_start(
            &ck,
            &ck.architecture.generator,
            &ck.architecture.discriminator,
            0.99,
            &hyper,
            1,
        )
        .unwrap();
        assert_eq!(ws.ema.shadow, st.generator);
        assert_eq!(ws.step, 3);
    }

    #[test]
    fn tampered_shape_names_layer() {
        let (st, _) = trained_state();
        let mut ck = Checkpoint::from_state(&st, "abc", false);
        ck.discriminator[1].bias.push(0.0);
        match Checkpoint::from_json(&ck.to_json()).unwrap_err() {
            CheckpointError::Shape { net, layer, .. } => {
                assert_eq!(net, "discriminator");
                assert_eq!(layer, 1);
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn future_version_rejected() {
        let (st, _) = trained_state();
        let mut ck = Checkpoint::from_state(&st, "abc", false);
        ck.version = CHECKPOINT_VERSION + 1;
        assert!(matches!(
            Checkpoint::from_json(&ck.to_json()),
            Err(CheckpointError::Version {
                found: 2,
                supported: 1
            })
        ));
        assert!(matches!(
            Checkpoint::from_json("{not json"),
            Err(CheckpointError::Malformed(_))
        ));
    }

    #[test]
    fn warm_start_rejects_other_architecture() {
        let (st, hyper) = trained_state();
        let ck = Checkpoint::from_state(&st, "abc", false);
        let wide = Architecture::new(&[2, 16, 2], Activation::Tanh);
        let err =
            warm_start(&ck, &wide, &ck.architecture.discriminator, 0.99, &hyper, 0).unwrap_err();
        assert!(
            matches!(err, CheckpointError::Shape { ref net, layer: 0, .. } if net == "generator"),
            "{err}"
        );
    }

    #[test]
    fn file_round_trip() {
        let (st, _) = trained_state();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/ck.json");
        let ck = Checkpoint::from_state(&st, "abc", true);
        save_checkpoint(&ck, &path).unwrap();
        let first = fs::read(&path).unwrap();
        save_checkpoint(&load_checkpoint(&path).unwrap(), &path).unwrap();
        assert_eq!(fs::read(&path).unwrap(), first);
        assert!(matches!(
            load_checkpoint(&dir.path().join("nope.json")),
            Err(CheckpointError::Io { .. })
        ));
    }
}
