//! Seed x cell training runs, periodic evaluation, checkpoints and the
//! summary aggregate.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::checkpoint::{save_checkpoint, warm_start, Checkpoint};
use super::config::{ExperimentConfig, Mode};
use super::output::{num, opt, write_text, Csv};
use super::HarnessError;
use crate::gan::{train_step, DataSpec, GanError, GanState, MlpParams, SdKind, SdLossSpec};
use crate::metrics::{
    data_frechet, mode_coverage, random_feature_frechet, trajectory_variance, CheckpointSeries,
    MeanStd,
};
use crate::rng::Rng;
use crate::tensor::Tensor;

// Evaluation streams, disjoint from the training streams.
const STREAM_EVAL_REAL: u64 = 10;
const STREAM_EVAL_LATENT: u64 = 11;
const STREAM_TRAJ_LATENT: u64 = 12;

/// One ablation cell. `sd_kind` is also used by baseline cells, where the
/// SD loss is computed as a monitor only (`alpha = 0`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub name: String,
    pub sd_kind: SdKind,
    pub alpha: f64,
    pub augment: bool,
}

impl Cell {
    pub fn baseline(kind: SdKind, augment: bool) -> Self {
        Self {
            name: format!("baseline_{}", if augment { "aug" } else { "noaug" }),
            sd_kind: kind,
            alpha: 0.0,
            augment,
        }
    }

    pub fn sd(kind: SdKind, alpha: f64, augment: bool) -> Self {
        Self {
            name: format!(
                "sd_{}_{}",
                kind.name(),
                if augment { "aug" } else { "noaug" }
            ),
            sd_kind: kind,
            alpha,
            augment,
        }
    }

    pub fn is_baseline(&self) -> bool {
        self.alpha == 0.0
    }
}

/// Cells for `train` (baseline + configured SD variant) or `ablate`
/// (baseline and every configured loss kind, times every augment setting).
pub fn training_cells(cfg: &ExperimentConfig) -> Vec<Cell> {
    match cfg.mode {
        Mode::Ablate => {
            let mut cells = Vec::new();
            for &aug in &cfg.ablation.augment {
                if cfg.ablation.include_baseline {
                    cells.push(Cell::baseline(cfg.sd.kind, aug));
                }
                for &k in &cfg.ablation.kinds {
                    cells.push(Cell::sd(k, cfg.sd.alpha, aug));
                }
            }
            cells
        }
        _ => vec![
            Cell::baseline(cfg.sd.kind, cfg.sd.augment),
            Cell::sd(cfg.sd.kind, cfg.sd.alpha, cfg.sd.augment),
        ],
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub step: u64,
    pub loss_d: Option<f64>,
    pub loss_g_adv: Option<f64>,
    pub loss_sd: Option<f64>,
    pub frechet_data: f64,
    pub frechet_feature: f64,
    pub modes_hit: usize,
    pub hq_fraction: f64,
}

pub const RUN_CSV_HEADER: [&str; 8] = [
    "step",
    "loss_d",
    "loss_g_adv",
    "loss_sd",
    "frechet_data",
    "frechet_feature",
    "modes_hit",
    "hq_fraction",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub cell: String,
    pub seed: u64,
    pub rows: Vec<MetricRow>,
    pub trajectory_variance: Option<MeanStd>,
    pub diverged: bool,
    pub diverged_at: Option<u64>,
    pub start_step: u64,
    pub final_step: u64,
    /// Fréchet distance of the starting teacher against the pre-shift data
    /// (fine-tuning only).
    pub reference_frechet_data: Option<f64>,
    pub checkpoints: Vec<PathBuf>,
    pub wall_time_secs: f64,
}

impl RunRecord {
    pub fn last_row(&self) -> Option<&MetricRow> {
        self.rows.last()
    }

    pub fn to_csv(&self) -> Csv {
        let mut csv = Csv::new(
            &[
                ("config_hash", self.config_hash.clone()),
                ("cell", self.cell.clone()),
                ("seed", self.seed.to_string()),
                ("diverged", self.diverged.to_string()),
            ],
            &RUN_CSV_HEADER,
        );
        for r in &self.rows {
            csv.row(&[
                r.step.to_string(),
                opt(r.loss_d),
                opt(r.loss_g_adv),
                opt(r.loss_sd),
                num(r.frechet_data),
                num(r.frechet_feature),
                r.modes_hit.to_string(),
                num(r.hq_fraction),
            ]);
        }
        csv
    }
}

/// Fixed evaluation material for one seed.
pub struct Evaluator {
    pub data: DataSpec,
    pub real: Tensor,
    pub latents: Tensor,
    pub trajectory_latents: Tensor,
    pub metric_net: MlpParams,
    pub threshold_std: f64,
}

impl Evaluator {
    pub fn new(cfg: &ExperimentConfig, data: &DataSpec, seed: u64) -> Self {
        let t = &cfg.training;
        let root = Rng::seed(seed);
        Self {
            data: data.clone(),
            real: data.sample(t.eval_samples, &mut root.fork(STREAM_EVAL_REAL)),
            latents: root
                .fork(STREAM_EVAL_LATENT)
                .normal_tensor(t.eval_samples, t.latent_dim),
            trajectory_latents: root
                .fork(STREAM_TRAJ_LATENT)
                .normal_tensor(t.trajectory_latents, t.latent_dim),
            metric_net: t.metric_net(),
            threshold_std: t.threshold_std,
        }
    }

    /// Metrics of `generator` on the fixed latents; losses left empty.
    pub fn evaluate(&self, generator: &MlpParams, step: u64) -> Result<MetricRow, HarnessError> {
        let fake = generator
            .forward_plain(&self.latents)
            .map_err(GanError::from)?;
        if !fake.is_finite() {
            return Ok(MetricRow {
                step,
                loss_d: None,
                loss_g_adv: None,
                loss_sd: None,
                frechet_data: f64::NAN,
                frechet_feature: f64::NAN,
                modes_hit: 0,
                hq_fraction: 0.0,
            });
        }
        let cov = mode_coverage(&fake, &self.data, self.threshold_std);
        Ok(MetricRow {
            step,
            loss_d: None,
            loss_g_adv: None,
            loss_sd: None,
            frechet_data: data_frechet(&fake, &self.real)?,
            frechet_feature: random_feature_frechet(&fake, &self.real, &self.metric_net)?,
            modes_hit: cov.modes_hit,
            hq_fraction: cov.high_quality_fraction,
        })
    }
}

/// Trains one cell from `state` for `cfg.training.steps` steps. Metrics and
/// trajectory snapshots use the EMA generator. Divergence ends the run and
/// is recorded, not returned as an error.
pub fn run_cell(
    cfg: &ExperimentConfig,
    cell: &Cell,
    seed: u64,
    mut state: GanState,
    data: &DataSpec,
    ckpt_dir: Option<&Path>,
) -> Result<RunRecord, HarnessError> {
    let started = Instant::now();
    let t = &cfg.training;
    let hash = cfg.hash();
    let spec: SdLossSpec = cfg.sd.spec(cell.sd_kind, cell.alpha, cell.augment)?;
    let hyper = t.hyper(data);
    let eval = Evaluator::new(cfg, data, seed);
    let start = state.step;
    let snap_at: Vec<u64> = t.checkpoint_steps().iter().map(|s| start + s).collect();

    let mut rows = vec![eval.evaluate(&state.ema.shadow, start)?];
    let mut snapshots = Vec::new();
    let mut checkpoints = Vec::new();
    let mut diverged_at = None;

    for _ in 0..t.steps {
        let batch = data.sample(hyper.batch_size, &mut state.rng);
        let log = match train_step(&mut state, &batch, Some(&spec), &hyper) {
            Ok(l) => l,
            Err(GanError::Diverged { step, .. }) => {
                diverged_at = Some(step);
                break;
            }
            Err(e) => return Err(e.into()),
        };
        let step = state.step;
        if (step - start).is_multiple_of(t.eval_interval) || step == start + t.steps {
            let mut row = eval.evaluate(&state.ema.shadow, step)?;
            if !(row.frechet_data.is_finite() && row.frechet_feature.is_finite()) {
                diverged_at = Some(step);
                break;
            }
            row.loss_d = Some(log.loss_d);
            row.loss_g_adv = Some(log.loss_g_adv);
            row.loss_sd = log.loss_sd;
            rows.push(row);
        }
        if snap_at.contains(&step) {
            snapshots.push(state.ema.shadow.clone());
            if let (Some(dir), true) = (ckpt_dir, t.save_checkpoints) {
                let path = dir.join(format!("ckpt_{step:08}.json"));
                save_checkpoint(&Checkpoint::from_state(&state, &hash, true), &path)?;
                checkpoints.push(path);
            }
        }
    }

    let trajectory_variance = if diverged_at.is_none() && snapshots.len() >= 2 {
        let series = CheckpointSeries {
            snapshots,
            latents: eval.trajectory_latents.clone(),
        };
        let net = (t.trajectory_distance == SdKind::Feature).then_some(&eval.metric_net);
        Some(trajectory_variance(&series, t.trajectory_distance, net)?)
    } else {
        None
    };

    Ok(RunRecord {
        config_hash: hash,
        cell: cell.name.clone(),
        seed,
        rows,
        trajectory_variance,
        diverged: diverged_at.is_some(),
        diverged_at,
        start_step: start,
        final_step: state.step,
        reference_frechet_data: None,
        checkpoints,
        wall_time_secs: started.elapsed().as_secs_f64(),
    })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FinalStats {
    pub frechet_data: f64,
    pub frechet_feature: f64,
    pub modes_hit: f64,
    pub hq_fraction: f64,
    pub trajectory_variance: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub diverged: bool,
    pub final_step: u64,
    pub last: Option<MetricRow>,
    pub trajectory_variance: Option<MeanStd>,
    pub wall_time_secs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub cell: Cell,
    pub runs: Vec<RunSummary>,
    /// Over non-diverged seeds; `None` if every seed diverged.
    pub mean: Option<FinalStats>,
    pub median: Option<FinalStats>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config_hash: String,
    pub mode: Mode,
    pub cells: Vec<CellSummary>,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn aggregate(records: &[&RunRecord], reduce: fn(Vec<f64>) -> f64) -> Option<FinalStats> {
    let ok: Vec<&MetricRow> = records
        .iter()
        .filter(|r| !r.diverged)
        .filter_map(|r| r.last_row())
        .collect();
    if ok.is_empty() {
        return None;
    }
    let col = |f: fn(&MetricRow) -> f64| reduce(ok.iter().map(|r| f(r)).collect());
    let tv: Vec<f64> = records
        .iter()
        .filter(|r| !r.diverged)
        .filter_map(|r| r.trajectory_variance.map(|m| m.mean))
        .collect();
    Some(FinalStats {
        frechet_data: col(|r| r.frechet_data),
        frechet_feature: col(|r| r.frechet_feature),
        modes_hit: col(|r| r.modes_hit as f64),
        hq_fraction: col(|r| r.hq_fraction),
        trajectory_variance: (!tv.is_empty()).then(|| reduce(tv)),
    })
}

pub fn summarize(cfg: &ExperimentConfig, cells: &[Cell], records: &[RunRecord]) -> Summary {
    let mean = |v: Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
    Summary {
        config_hash: cfg.hash(),
        mode: cfg.mode,
        cells: cells
            .iter()
            .map(|cell| {
                let rs: Vec<&RunRecord> = records.iter().filter(|r| r.cell == cell.name).collect();
                CellSummary {
                    cell: cell.clone(),
                    runs: rs
                        .iter()
                        .map(|r| RunSummary {
                            seed: r.seed,
                            diverged: r.diverged,
                            final_step: r.final_step,
                            last: r.last_row().cloned(),
                            trajectory_variance: r.trajectory_variance,
                            wall_time_secs: r.wall_time_secs,
                        })
                        .collect(),
                    mean: aggregate(&rs, mean),
                    median: aggregate(&rs, median),
                }
            })
            .collect(),
    }
}

fn pool(threads: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .expect("thread pool")
}

fn write_records(out: &Path, records: &[RunRecord]) -> Result<(), HarnessError> {
    for r in records {
        r.to_csv()
            .write(&out.join(&r.cell).join(format!("seed_{}.csv", r.seed)))?;
    }
    Ok(())
}

fn finish(
    out: &Path,
    cfg: &ExperimentConfig,
    cells: &[Cell],
    records: Vec<RunRecord>,
) -> Result<(Vec<RunRecord>, Summary), HarnessError> {
    write_records(out, &records)?;
    let summary = summarize(cfg, cells, &records);
    write_text(
        &out.join("summary.json"),
        &(serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n"),
    )?;
    if !records.is_empty() && records.iter().all(|r| r.diverged) {
        return Err(HarnessError::AllDiverged);
    }
    Ok((records, summary))
}

/// Runs every (seed, cell) pair on a pool of `threads` workers, writes one
/// CSV per run and `summary.json` once all runs are done.
pub fn run_training(
    cfg: &ExperimentConfig,
    out: &Path,
    threads: usize,
) -> Result<(Vec<RunRecord>, Summary), HarnessError> {
    let cells = training_cells(cfg);
    let jobs: Vec<(&Cell, u64)> = cells
        .iter()
        .flat_map(|c| cfg.seeds.iter().map(move |&s| (c, s)))
        .collect();
    let t = &cfg.training;
    let hyper = t.hyper(&cfg.data);
    let records = pool(threads).install(|| {
        jobs.par_iter()
            .map(|&(cell, seed)| {
                let state = GanState::new(
                    &t.generator_arch(),
                    &t.discriminator_arch(),
                    t.beta_ema,
                    &hyper,
                    seed,
                )?;
                let ckpt_dir = out.join(&cell.name).join(format!("seed_{seed}"));
                run_cell(cfg, cell, seed, state, &cfg.data, Some(&ckpt_dir))
            })
            .collect::<Result<Vec<_>, HarnessError>>()
    })?;
    finish(out, cfg, &cells, records)
}

/// Warm-starts generator, discriminator and EMA from `ckpt`, optionally on
/// a new data distribution, and trains the SD cell (plus an `alpha = 0`
/// comparison cell when configured).
pub fn run_finetune(
    cfg: &ExperimentConfig,
    ckpt: &Checkpoint,
    out: &Path,
    threads: usize,
) -> Result<(Vec<RunRecord>, Summary), HarnessError> {
    let t = &cfg.training;
    let target = cfg
        .finetune
        .data
        .clone()
        .unwrap_or_else(|| cfg.data.clone());
    let hyper = t.hyper(&target);
    let mut cells = vec![Cell::sd(cfg.sd.kind, cfg.sd.alpha, cfg.sd.augment)];
    if cfg.finetune.compare_baseline && cfg.sd.alpha > 0.0 {
        cells.insert(0, Cell::baseline(cfg.sd.kind, cfg.sd.augment));
    }
    let base = out.join("finetune");
    let jobs: Vec<(&Cell, u64)> = cells
        .iter()
        .flat_map(|c| cfg.seeds.iter().map(move |&s| (c, s)))
        .collect();
    let records = pool(threads).install(|| {
        jobs.par_iter()
            .map(|&(cell, seed)| {
                let state = warm_start(
                    ckpt,
                    &t.generator_arch(),
                    &t.discriminator_arch(),
                    t.beta_ema,
                    &hyper,
                    seed,
                )?;
                let reference =
                    Evaluator::new(cfg, &cfg.data, seed).evaluate(&state.ema.shadow, state.step)?;
                let ckpt_dir = base.join(&cell.name).join(format!("seed_{seed}"));
                let mut rec = run_cell(cfg, cell, seed, state, &target, Some(&ckpt_dir))?;
                rec.reference_frechet_data = Some(reference.frechet_data);
                Ok(rec)
            })
            .collect::<Result<Vec<_>, HarnessError>>()
    })?;
    finish(&base, cfg, &cells, records)
}
