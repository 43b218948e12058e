use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sdgan::harness::output::claim_output_dir;
use sdgan::harness::{
    emit_rank_report, load_checkpoint, parse_config, run_dirac_study, run_finetune, run_training,
    ExperimentConfig, HarnessError, Mode,
};

#[derive(Parser)]
#[command(name = "sdgan", version, about = "EMA self-distillation GAN lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dirac-GAN trajectories and Routh-Hurwitz stability sweep
    Dirac(Common),
    /// Baseline vs configured SD variant on the toy data
    Train(Common),
    /// Loss-kind x augmentation grid
    Ablate(Common),
    /// Warm start from a checkpoint and continue training
    Finetune(WithCheckpoint),
    /// Joint SD-distance / discriminator-score extremes of a checkpoint
    Rank(WithCheckpoint),
}

#[derive(Args)]
struct Common {
    /// JSON config; defaults are used when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated seeds (overrides `seeds`)
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Worker threads for independent runs
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Args)]
struct WithCheckpoint {
    #[command(flatten)]
    common: Common,
    /// Checkpoint file (overrides the config's checkpoint path)
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

fn load(common: &Common, mode: Mode) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
                path: path.clone(),
                source,
            })?;
            parse_config(&text)?
        }
        None => ExperimentConfig::with_mode(mode),
    };
    cfg.mode = mode;
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seeds) = &common.seeds {
        cfg.seeds = seeds.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn checkpoint_path(
    arg: &Option<PathBuf>,
    from_cfg: &Option<PathBuf>,
) -> Result<PathBuf, HarnessError> {
    arg.clone().or_else(|| from_cfg.clone()).ok_or_else(|| {
        HarnessError::Usage("a checkpoint is required (--checkpoint or config)".into())
    })
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Dirac(c) => {
            let cfg = load(&c, Mode::DiracStudy)?;
            claim_output_dir(&cfg.output_dir, &cfg)?;
            for p in run_dirac_study(&cfg, &cfg.output_dir)? {
                println!("{}", p.display());
            }
        }
        Command::Train(c) => train(&c, Mode::Train)?,
        Command::Ablate(c) => train(&c, Mode::Ablate)?,
        Command::Finetune(w) => {
            let cfg = load(&w.common, Mode::Finetune)?;
            let path = checkpoint_path(&w.checkpoint, &cfg.finetune.checkpoint)?;
            let ckpt = load_checkpoint(&path)?;
            claim_output_dir(&cfg.output_dir, &cfg)?;
            let (records, _) = run_finetune(&cfg, &ckpt, &cfg.output_dir, w.common.threads)?;
            report(&records);
        }
        Command::Rank(w) => {
            let cfg = load(&w.common, Mode::Rank)?;
            let path = checkpoint_path(&w.checkpoint, &cfg.rank.checkpoint)?;
            let ckpt = load_checkpoint(&path)?;
            claim_output_dir(&cfg.output_dir, &cfg)?;
            let (_, files) = emit_rank_report(&cfg, &ckpt, &cfg.output_dir)?;
            for p in files {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

fn train(c: &Common, mode: Mode) -> Result<(), HarnessError> {
    let cfg = load(c, mode)?;
    claim_output_dir(&cfg.output_dir, &cfg)?;
    let (records, _) = run_training(&cfg, &cfg.output_dir, c.threads)?;
    report(&records);
    Ok(())
}

fn report(records: &[sdgan::harness::RunRecord]) {
    for r in records {
        let last = r.last_row();
        println!(
            "{:<20} seed {:<4} step {:<7} {} frechet_data {:<10.5} modes {} tv {}",
            r.cell,
            r.seed,
            r.final_step,
            if r.diverged { "DIVERGED" } else { "ok" },
            last.map_or(f64::NAN, |l| l.frechet_data),
            last.map_or(0, |l| l.modes_hit),
            r.trajectory_variance
                .map_or("-".into(), |t| format!("{:.5}", t.mean)),
        );
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
