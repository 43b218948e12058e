//! Trajectory and stability-sweep files for the Dirac-GAN.

use std::path::{Path, PathBuf};

use super::config::ExperimentConfig;
use super::output::{num, Csv};
use super::HarnessError;
use crate::dirac::{
    routh_hurwitz, simulate_discrete, simulate_ode, DiracParams, Integrator, Trajectory,
};

/// Discrete-play configurations: `(file stem, alpha enabled, ema readout)`.
/// Without the EMA readout `beta = 0`, so the anchor trails the generator by
/// one step.
const PLAY_CONFIGS: [(&str, bool, bool); 4] = [
    ("traj_gan", false, false),
    ("traj_gan_ema", false, true),
    ("traj_sd_no_ema", true, false),
    ("traj_sd_ema", true, true),
];

fn write_trajectory(
    path: &Path,
    t: &Trajectory,
    provenance: &[(&str, String)],
) -> Result<(), HarnessError> {
    let mut csv = Csv::new(provenance, &["t", "theta", "psi", "phi", "radius"]);
    for (time, s) in t.times.iter().zip(&t.states) {
        csv.row(&[
            num(*time),
            num(s.theta),
            num(s.psi),
            num(s.phi),
            num(s.radius()),
        ]);
    }
    csv.write(path)
}

/// One row of the stability sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub params: DiracParams,
    pub margin: f64,
    pub expected_margin: f64,
    pub routh_pass: bool,
    pub max_re: f64,
    pub eig_re: [f64; 3],
}

pub fn stability_sweep(base: &DiracParams, alphas: &[f64], eta_phis: &[f64]) -> Vec<SweepRow> {
    let mut rows = Vec::with_capacity(alphas.len() * eta_phis.len());
    for &alpha in alphas {
        for &eta_phi in eta_phis {
            let p = DiracParams {
                alpha,
                eta_phi,
                ..*base
            };
            let r = routh_hurwitz(&p);
            rows.push(SweepRow {
                params: p,
                margin: r.margin,
                expected_margin: p.eta_d * p.eta_g * p.eta_g * p.c * p.c * p.alpha,
                routh_pass: r.routh_hurwitz_pass,
                max_re: r.max_real_part,
                eig_re: r.eigenvalues.map(|z| z.re),
            });
        }
    }
    rows
}

/// Writes four discrete-play trajectories (with and without SD, with and
/// without EMA readout), two RK4 trajectories (alpha = 0 and the configured
/// alpha) and `stability_sweep.csv`. Returns the written paths.
pub fn run_dirac_study(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let d = &cfg.dirac;
    let hash = cfg.hash();
    let dir = out.join("dirac");
    let mut written = Vec::new();
    let alpha = d.params.alpha;

    let play = DiracParams {
        eta_g: d.lr,
        eta_d: d.lr,
        ..d.params
    };
    for (stem, sd, ema) in PLAY_CONFIGS {
        let p = DiracParams {
            alpha: if sd { alpha } else { 0.0 },
            ..play
        };
        let beta = if ema { d.beta } else { 0.0 };
        let t = simulate_discrete(d.s0, &p, d.steps, beta, d.order).map_err(|e| {
            crate::harness::ConfigError::Range {
                path: "dirac".into(),
                msg: e.to_string(),
            }
        })?;
        let path = dir.join(format!("{stem}.csv"));
        write_trajectory(
            &path,
            &t,
            &[
                ("config_hash", hash.clone()),
                ("alpha", num(p.alpha)),
                ("beta", num(beta)),
                ("lr", num(d.lr)),
                ("diverged", t.diverged.to_string()),
            ],
        )?;
        written.push(path);
    }

    for (stem, a) in [("ode_alpha0", 0.0), ("ode_sd", alpha)] {
        let p = DiracParams {
            alpha: a,
            ..d.params
        };
        let t = simulate_ode(d.s0, &p, d.ode_t_end, d.ode_dt, Integrator::Rk4).map_err(|e| {
            crate::harness::ConfigError::Range {
                path: "dirac".into(),
                msg: e.to_string(),
            }
        })?;
        let path = dir.join(format!("{stem}.csv"));
        write_trajectory(
            &path,
            &t,
            &[
                ("config_hash", hash.clone()),
                ("alpha", num(a)),
                ("eta_phi", num(p.eta_phi)),
                ("dt", num(d.ode_dt)),
                ("diverged", t.diverged.to_string()),
            ],
        )?;
        written.push(path);
    }

    let mut csv = Csv::new(
        &[("config_hash", hash)],
        &[
            "alpha",
            "eta_phi",
            "eta_g",
            "eta_d",
            "c",
            "margin",
            "expected_margin",
            "routh_pass",
            "max_re",
            "re1",
            "re2",
            "re3",
        ],
    );
    for r in stability_sweep(&d.params, &d.sweep_alpha, &d.sweep_eta_phi) {
        let p = r.params;
        csv.row(&[
            num(p.alpha),
            num(p.eta_phi),
            num(p.eta_g),
            num(p.eta_d),
            num(p.c),
            num(r.margin),
            num(r.expected_margin),
            r.routh_pass.to_string(),
            num(r.max_re),
            num(r.eig_re[0]),
            num(r.eig_re[1]),
            num(r.eig_re[2]),
        ]);
    }
    let path = dir.join("stability_sweep.csv");
    csv.write(&path)?;
    written.push(path);
    Ok(written)
}
