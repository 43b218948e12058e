//! Joint SD-distance / discriminator-score extremes of a trained model.

use std::path::{Path, PathBuf};

use super::checkpoint::Checkpoint;
use super::config::ExperimentConfig;
use super::output::{num, write_text, Csv};
use super::HarnessError;
use crate::metrics::{rank_joint_extremes, JointRanking};
use crate::rng::Rng;
use crate::tensor::Tensor;

const STREAM_RANK_LATENT: u64 = 20;

/// The latents a rank report evaluates, drawn from the first seed.
pub fn rank_latents(cfg: &ExperimentConfig) -> Tensor {
    Rng::seed(cfg.seeds[0])
        .fork(STREAM_RANK_LATENT)
        .normal_tensor(cfg.rank.n_latents, cfg.training.latent_dim)
}

/// Ranks `cfg.rank.n_latents` latents drawn from the first seed and writes
/// `rank.csv` (every latent, with its group tag or `none`) and
/// `rank_groups.json`.
pub fn emit_rank_report(
    cfg: &ExperimentConfig,
    ckpt: &Checkpoint,
    out: &Path,
) -> Result<(JointRanking, Vec<PathBuf>), HarnessError> {
    let r = &cfg.rank;
    let seed = cfg.seeds[0];
    let latents = rank_latents(cfg);
    let spec = cfg.sd.spec(cfg.sd.kind, cfg.sd.alpha, false)?;
    let ranking = rank_joint_extremes(
        &ckpt.generator()?,
        &ckpt.ema_shadow()?,
        &ckpt.discriminator()?,
        &latents,
        r.k_sd,
        r.k_d,
        &spec,
    )?;

    let mut tag = vec!["none"; r.n_latents];
    for (group, idx) in &ranking.groups {
        for &i in idx {
            tag[i] = group.tag();
        }
    }
    let mut csv = Csv::new(
        &[
            ("config_hash", cfg.hash()),
            ("checkpoint_step", ckpt.step.to_string()),
            ("sd_kind", cfg.sd.kind.name().to_string()),
            ("seed", seed.to_string()),
        ],
        &["latent_index", "sd_distance", "d_score", "group", "x", "y"],
    );
    for i in 0..r.n_latents {
        let p = ranking.samples.row(i);
        csv.row(&[
            i.to_string(),
            num(ranking.sd_distance[i]),
            num(ranking.d_score[i]),
            tag[i].to_string(),
            num(p[0]),
            num(p[1]),
        ]);
    }
    let csv_path = out.join("rank.csv");
    csv.write(&csv_path)?;

    let groups: serde_json::Map<String, serde_json::Value> = ranking
        .groups
        .iter()
        .map(|(g, idx)| {
            let entries: Vec<serde_json::Value> = idx
                .iter()
                .map(|&i| {
                    serde_json::json!({
                        "latent_index": i,
                        "sd_distance": ranking.sd_distance[i],
                        "d_score": ranking.d_score[i],
                        "sample": ranking.samples.row(i),
                    })
                })
                .collect();
            (g.tag().to_string(), serde_json::Value::Array(entries))
        })
        .collect();
    let json_path = out.join("rank_groups.json");
    let doc = serde_json::json!({ "config_hash": cfg.hash(), "groups": groups });
    write_text(
        &json_path,
        &(serde_json::to_string_pretty(&doc).expect("json") + "\n"),
    )?;
    Ok((ranking, vec![csv_path, json_path]))
}
