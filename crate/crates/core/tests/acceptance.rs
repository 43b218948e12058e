//! Acceptance suite. Each criterion prints one `PASS`/`FAIL` line; the
//! process exits non-zero if any criterion fails.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector, Matrix3};
use num_complex::Complex64;

use sdgan::dirac::{
    characteristic_coefficients, jacobian, routh_hurwitz, simulate_discrete, simulate_ode,
    DiracParams, DiracState, Integrator, UpdateOrder,
};
use sdgan::gan::{
    ema_update, train_step, Activation, Architecture, EmaTracker, GanState, MlpParams, SdKind,
    SdLossSpec, TrainHyper,
};
use sdgan::harness::{
    load_checkpoint, run_finetune, run_training, save_checkpoint, training_cells, Checkpoint,
    ExperimentConfig, Mode,
};
use sdgan::metrics::{frechet_distance, GaussianFit};
use sdgan::rng::Rng;
use sdgan::tensor::{Graph, Tensor};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Eigenvalues of the Jacobian straight from nalgebra's Schur decomposition.
fn oracle_eigenvalues(p: &DiracParams) -> Vec<Complex64> {
    let j = jacobian(p);
    let m = Matrix3::from_fn(|r, c| j[r][c]);
    m.complex_eigenvalues().iter().copied().collect()
}

/// `det(lambda I - J)` coefficients from the trace, principal 2x2 minors
/// and determinant of `J`.
fn oracle_coefficients(p: &DiracParams) -> [f64; 4] {
    let j = jacobian(p);
    let trace = j[0][0] + j[1][1] + j[2][2];
    let minor = |a: usize, b: usize| j[a][a] * j[b][b] - j[a][b] * j[b][a];
    let minors = minor(0, 1) + minor(0, 2) + minor(1, 2);
    let det = j[0][0] * (j[1][1] * j[2][2] - j[1][2] * j[2][1])
        - j[0][1] * (j[1][0] * j[2][2] - j[1][2] * j[2][0])
        + j[0][2] * (j[1][0] * j[2][1] - j[1][1] * j[2][0]);
    [1.0, -trace, minors, -det]
}

fn random_params(rng: &mut Rng) -> DiracParams {
    let log_uniform = |rng: &mut Rng, lo: f64, hi: f64| (rng.uniform_in(lo.ln(), hi.ln())).exp();
    let sign = if rng.bernoulli(0.5) { 1.0 } else { -1.0 };
    DiracParams::new(
        log_uniform(rng, 0.01, 10.0),
        log_uniform(rng, 0.01, 10.0),
        log_uniform(rng, 1e-3, 1.0),
        rng.uniform_in(0.0, 2.0),
        sign * rng.uniform_in(0.1, 2.0),
    )
    .expect("valid draw")
}

fn routh_hurwitz_grid() -> Outcome {
    let start = Instant::now();
    let etas = [0.1, 1.0, 10.0];
    let (mut stable_ok, mut stable_n, mut marginal_ok, mut marginal_n) = (0, 0, 0, 0);
    for &eta_g in &etas {
        for &eta_d in &etas {
            for &eta_phi in &[0.001, 0.01, 0.1] {
                for &c in &[-2.0, 1.0] {
                    for &alpha in &[0.0, 0.01, 0.1, 1.0] {
                        let p = DiracParams::new(eta_g, eta_d, eta_phi, alpha, c).unwrap();
                        let r = routh_hurwitz(&p);
                        let oracle_max = oracle_eigenvalues(&p)
                            .iter()
                            .map(|z| z.re)
                            .fold(f64::MIN, f64::max);
                        if alpha == 0.0 {
                            marginal_n += 1;
                            if !r.routh_hurwitz_pass
                                && r.max_real_part.abs() <= 1e-9
                                && oracle_max.abs() <= 1e-9
                            {
                                marginal_ok += 1;
                            }
                        } else {
                            stable_n += 1;
                            let all_neg = r.eigenvalues.iter().all(|z| z.re < 0.0);
                            if r.routh_hurwitz_pass && all_neg && oracle_max < 0.0 {
                                stable_ok += 1;
                            }
                        }
                    }
                }
            }
        }
    }
    let t = start.elapsed();
    outcome(
        stable_ok == stable_n && marginal_ok == marginal_n && t < Duration::from_secs(1),
        format!("alpha>0 stable {stable_ok}/{stable_n}, alpha=0 marginal {marginal_ok}/{marginal_n}, {t:.2?}"),
    )
}

fn coefficient_identity() -> Outcome {
    let start = Instant::now();
    let mut rng = Rng::seed(11);
    let mut worst: f64 = 0.0;
    let mut root_residual: f64 = 0.0;
    for _ in 0..1000 {
        let p = random_params(&mut rng);
        let ours = characteristic_coefficients(&p);
        let symbolic = [
            1.0,
            p.eta_g * p.alpha + p.eta_phi,
            p.eta_d * p.eta_g * p.c * p.c,
            p.eta_d * p.eta_g * p.eta_phi * p.c * p.c,
        ];
        let oracle = oracle_coefficients(&p);
        for i in 0..4 {
            let scale = oracle[i].abs().max(1.0);
            worst = worst.max((ours[i] - oracle[i]).abs() / scale);
            worst = worst.max((symbolic[i] - oracle[i]).abs() / scale);
        }
        let mut ours_eig: Vec<Complex64> = routh_hurwitz(&p).eigenvalues.to_vec();
        let mut ref_eig = oracle_eigenvalues(&p);
        let key = |z: &Complex64| (z.re, z.im);
        ours_eig.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
        ref_eig.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
        for (a, b) in ours_eig.iter().zip(&ref_eig) {
            root_residual = root_residual.max((a - b).norm() / b.norm().max(1.0));
        }
    }
    let t = start.elapsed();
    outcome(
        worst <= 1e-12 && root_residual <= 1e-6 && t < Duration::from_secs(1),
        format!("max scaled coefficient error {worst:.2e}, eigenvalue agreement {root_residual:.2e}, {t:.2?}"),
    )
}

fn margin_identity() -> Outcome {
    let mut rng = Rng::seed(11);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let p = random_params(&mut rng);
        let [a3, a2, a1, a0] = oracle_coefficients(&p);
        let expected = p.eta_d * p.eta_g * p.eta_g * p.c * p.c * p.alpha;
        let ours = routh_hurwitz(&p).margin;
        let scale = expected.abs().max(1.0);
        worst = worst.max((ours - expected).abs() / scale);
        worst = worst.max((a2 * a1 - a3 * a0 - expected).abs() / scale);
    }
    outcome(
        worst <= 1e-12,
        format!("max scaled margin error {worst:.2e}"),
    )
}

fn dirac_phenomenology() -> Outcome {
    let start = Instant::now();
    let s0 = DiracState::new(1.0, 0.0, 0.0);
    let base = DiracParams::default();

    let p0 = DiracParams { alpha: 0.0, ..base };
    let t0 = simulate_ode(s0, &p0, 100.0, 1e-3, Integrator::Rk4).unwrap();
    let energy = |s: &DiracState| p0.eta_d * s.theta * s.theta + p0.eta_g * s.psi * s.psi;
    let e0 = energy(&s0);
    let drift = t0
        .states
        .iter()
        .map(|s| (energy(s) - e0).abs())
        .fold(0.0, f64::max);

    let p5 = DiracParams { alpha: 0.5, ..base };
    let t5 = simulate_ode(s0, &p5, 100.0, 1e-3, Integrator::Rk4).unwrap();
    let ratio = t5.last().radius() / s0.radius();

    let play = DiracParams {
        eta_g: 0.1,
        eta_d: 0.1,
        alpha: 1.0,
        ..base
    };
    let sd = simulate_discrete(s0, &play, 5000, 0.99, UpdateOrder::Simultaneous).unwrap();
    let converged_at = sd
        .states
        .iter()
        .position(|s| s.theta.abs() + s.psi.abs() < 1e-2);
    let gan = simulate_discrete(
        s0,
        &DiracParams { alpha: 0.0, ..play },
        5000,
        0.0,
        UpdateOrder::Simultaneous,
    )
    .unwrap();
    let gan_radius = gan.last().radius();

    let t = start.elapsed();
    outcome(
        drift <= 1e-3 && ratio < 0.1 && converged_at.is_some() && gan_radius >= s0.radius() && t < Duration::from_secs(10),
        format!(
            "energy drift {drift:.2e}, alpha=0.5 radius ratio {ratio:.3e}, SD play converged at {converged_at:?}, \
             plain play radius {gan_radius:.3}, {t:.2?}"
        ),
    )
}

/// Scalar objective `sum(y^2) / 2` of a random MLP on a fixed batch.
fn mlp_objective(params: &MlpParams, x: &Tensor) -> f64 {
    let y = params.forward_plain(x).unwrap();
    0.5 * y.norm_sq()
}

fn autodiff_soundness() -> Outcome {
    let start = Instant::now();
    let mut rng = Rng::seed(5);
    let mut worst: f64 = 0.0;
    let h = 1e-5;
    for trial in 0..100 {
        let depth = 1 + rng.below(3);
        let widths: Vec<usize> = (0..=depth).map(|_| 1 + rng.below(16)).collect();
        let act = if trial % 2 == 0 {
            Activation::Tanh
        } else {
            Activation::Relu
        };
        let mut params = MlpParams::init(&Architecture::new(&widths, act), &mut rng);
        for l in &mut params.layers {
            for b in l.bias.data_mut() {
                *b = rng.uniform_in(-0.5, 0.5);
            }
        }
        let rows = 1 + rng.below(5);
        let x = rng.normal_tensor(rows, widths[0]);

        let mut g = Graph::new();
        let bound = params.bind(&mut g);
        let xv = g.constant(x.clone());
        let y = bound.forward(&mut g, xv).unwrap();
        let sq = g.square(y);
        let s = g.sum(sq);
        let loss = g.mul_scalar(s, 0.5);
        g.backward(loss).unwrap();
        let grads = bound.grads(&g);

        let n_tensors = params.tensors().len();
        for ti in 0..n_tensors {
            for k in 0..params.tensors()[ti].len() {
                let orig = params.tensors()[ti].data()[k];
                params.tensors_mut()[ti].data_mut()[k] = orig + h;
                let up = mlp_objective(&params, &x);
                params.tensors_mut()[ti].data_mut()[k] = orig - h;
                let down = mlp_objective(&params, &x);
                params.tensors_mut()[ti].data_mut()[k] = orig;
                let numeric = (up - down) / (2.0 * h);
                let analytic = grads[ti].data()[k];
                let err = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-2);
                worst = worst.max(err);
            }
        }
    }
    let t = start.elapsed();
    outcome(
        worst < 1e-5 && t < Duration::from_secs(30),
        format!("100 MLPs, max relative error {worst:.2e}, {t:.2?}"),
    )
}

fn ema_closed_form() -> Outcome {
    let mut rng = Rng::seed(9);
    let arch = Architecture::new(&[3, 4, 2], Activation::Tanh);
    let shadow0 = MlpParams::init(&arch, &mut rng);
    let source = MlpParams::init(&arch, &mut rng);
    let mut worst: f64 = 0.0;
    for &beta in &[0.0, 0.9, 0.999] {
        let mut tracker = EmaTracker::from_shadow(beta, shadow0.clone()).unwrap();
        for k in 1..=10_000i32 {
            ema_update(&mut tracker, &source).unwrap();
            let bk = beta.powi(k);
            for ((sh, s0), s) in tracker
                .shadow
                .tensors()
                .iter()
                .zip(shadow0.tensors())
                .zip(source.tensors())
            {
                for ((a, b0), c) in sh.data().iter().zip(s0.data()).zip(s.data()) {
                    worst = worst.max((a - (bk * b0 + (1.0 - bk) * c)).abs());
                }
            }
        }
    }
    outcome(
        worst <= 1e-12,
        format!("k <= 1e4, beta in {{0, 0.9, 0.999}}, max error {worst:.2e}"),
    )
}

fn small_state(seed: u64) -> (GanState, TrainHyper) {
    let hyper = TrainHyper {
        batch_size: 64,
        ..TrainHyper::default()
    };
    let g = Architecture::new(&[2, 16, 16, 2], Activation::Tanh);
    let d = Architecture::new(&[2, 16, 16, 1], Activation::Tanh);
    (GanState::new(&g, &d, 0.99, &hyper, seed).unwrap(), hyper)
}

fn gradient_stop() -> Outcome {
    let cfg = ExperimentConfig::with_mode(Mode::Train);
    let mut steps = 0;
    let mut nonzero = 0;
    for kind in [SdKind::L1, SdKind::L2, SdKind::Feature] {
        for augment in [false, true] {
            let spec = cfg.sd.spec(kind, 1.0, augment).unwrap();
            let (mut state, hyper) = small_state(3);
            let mut data_rng = Rng::seed(4);
            for _ in 0..100 {
                let batch = cfg.data.sample(hyper.batch_size, &mut data_rng);
                let log = train_step(&mut state, &batch, Some(&spec), &hyper).unwrap();
                steps += 1;
                if log.teacher_grad_norm != 0.0 {
                    nonzero += 1;
                }
            }
        }
    }
    outcome(
        nonzero == 0,
        format!(
            "{steps} steps over 3 kinds x 2 augment settings, nonzero teacher gradients {nonzero}"
        ),
    )
}

fn baseline_equivalence() -> Outcome {
    let cfg = ExperimentConfig::with_mode(Mode::Train);
    let spec: SdLossSpec = cfg.sd.spec(SdKind::Feature, 0.0, true).unwrap();
    let (mut a, hyper) = small_state(21);
    let (mut b, _) = small_state(21);
    let mut rng_a = Rng::seed(22);
    let mut rng_b = Rng::seed(22);
    for _ in 0..500 {
        let batch_a = cfg.data.sample(hyper.batch_size, &mut rng_a);
        let batch_b = cfg.data.sample(hyper.batch_size, &mut rng_b);
        train_step(&mut a, &batch_a, None, &hyper).unwrap();
        train_step(&mut b, &batch_b, Some(&spec), &hyper).unwrap();
    }
    let bits = |s: &GanState| -> Vec<u64> {
        [&s.generator, &s.discriminator, &s.ema.shadow]
            .iter()
            .flat_map(|m| {
                m.tensors()
                    .into_iter()
                    .flat_map(|t| t.data().iter().map(|v| v.to_bits()))
                    .collect::<Vec<_>>()
            })
            .collect()
    };
    let (ba, bb) = (bits(&a), bits(&b));
    let differing = ba.iter().zip(&bb).filter(|(x, y)| x != y).count();
    outcome(
        differing == 0 && ba.len() == bb.len(),
        format!("500 steps, {} parameters, {differing} differ", ba.len()),
    )
}

fn gaussian_1d(mean: f64, var: f64) -> GaussianFit {
    GaussianFit::new(
        DVector::from_element(1, mean),
        DMatrix::from_element(1, 1, var),
    )
    .unwrap()
}

fn random_gaussian(rng: &mut Rng, dim: usize) -> GaussianFit {
    let mean = DVector::from_fn(dim, |_, _| 2.0 * rng.normal());
    let a = DMatrix::from_fn(dim, dim, |_, _| rng.normal());
    let cov = &a * a.transpose() + DMatrix::identity(dim, dim) * 0.01;
    GaussianFit::new(mean, cov).unwrap()
}

fn frechet_metric() -> Outcome {
    let std = gaussian_1d(0.0, 1.0);
    let shifted = frechet_distance(&std, &gaussian_1d(1.0, 1.0)).unwrap();
    let wide = frechet_distance(&std, &gaussian_1d(0.0, 4.0)).unwrap();
    let closed_ok = (shifted - 1.0).abs() <= 1e-9 && (wide - 1.0).abs() <= 1e-9;

    let mut rng = Rng::seed(77);
    let mut violations = 0;
    for i in 0..100 {
        let dim = 1 + i % 4;
        let (a, b, c) = (
            random_gaussian(&mut rng, dim),
            random_gaussian(&mut rng, dim),
            random_gaussian(&mut rng, dim),
        );
        let d = |x: &GaussianFit, y: &GaussianFit| frechet_distance(x, y).unwrap().sqrt();
        let (ab, ba, bc, ac) = (d(&a, &b), d(&b, &a), d(&b, &c), d(&a, &c));
        let tol = 1e-7 * (1.0 + ab + bc + ac);
        if d(&a, &a) > 1e-6 || ab < 0.0 || (ab - ba).abs() > tol || ac > ab + bc + tol {
            violations += 1;
        }
    }
    outcome(
        closed_ok && violations == 0,
        format!("N(0,1)|N(1,1) = {shifted:.12}, N(0,1)|N(0,4) = {wide:.12}, {violations}/100 triples violate"),
    )
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn directional_benefit() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::with_mode(Mode::Train);
    cfg.seeds = vec![0, 1, 2, 3, 4];
    cfg.training.steps = 20_000;
    cfg.training.eval_interval = 5_000;
    cfg.training.save_checkpoints = false;
    cfg.sd.kind = SdKind::Feature;
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    let (records, _) = match run_training(&cfg, dir.path(), threads) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("training failed: {e}")),
    };
    let cells = training_cells(&cfg);
    let (base, sd) = (&cells[0].name, &cells[1].name);
    let pick = |cell: &str, seed: u64| {
        records
            .iter()
            .find(|r| r.cell == cell && r.seed == seed)
            .unwrap()
    };

    let mut tv_wins = 0;
    let (mut fd_base, mut fd_sd, mut modes_base, mut modes_sd) = (vec![], vec![], vec![], vec![]);
    let mut tv_pairs = Vec::new();
    for &seed in &cfg.seeds {
        let (b, s) = (pick(base, seed), pick(sd, seed));
        let tv =
            |r: &sdgan::harness::RunRecord| r.trajectory_variance.map_or(f64::INFINITY, |t| t.mean);
        if tv(s) < tv(b) {
            tv_wins += 1;
        }
        tv_pairs.push(format!("{:.4}/{:.4}", tv(b), tv(s)));
        let last = |r: &sdgan::harness::RunRecord| r.last_row().cloned();
        let (lb, ls) = (last(b).unwrap(), last(s).unwrap());
        let bad = |r: &sdgan::harness::RunRecord| r.diverged;
        fd_base.push(if bad(b) {
            f64::INFINITY
        } else {
            lb.frechet_feature
        });
        fd_sd.push(if bad(s) {
            f64::INFINITY
        } else {
            ls.frechet_feature
        });
        modes_base.push(lb.modes_hit as f64);
        modes_sd.push(ls.modes_hit as f64);
    }
    let (mb, ms) = (median(fd_base), median(fd_sd));
    let (cb, cs) = (median(modes_base), median(modes_sd));
    let t = start.elapsed();
    outcome(
        tv_wins >= 4 && ms <= mb && cs >= cb && t < Duration::from_secs(1800),
        format!(
            "tv lower in {tv_wins}/5 seeds (baseline/sd {}), median frechet_feature {mb:.4} vs {ms:.4}, \
             median modes {cb} vs {cs}, {t:.0?}",
            tv_pairs.join(" ")
        ),
    )
}

fn checkpoint_round_trip() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::with_mode(Mode::Train);
    let hyper = cfg.training.hyper(&cfg.data);
    let t = &cfg.training;
    let mut state = GanState::new(
        &t.generator_arch(),
        &t.discriminator_arch(),
        t.beta_ema,
        &hyper,
        0,
    )
    .unwrap();
    let mut data_rng = Rng::seed(1);
    for _ in 0..300 {
        let batch = cfg.data.sample(hyper.batch_size, &mut data_rng);
        train_step(&mut state, &batch, None, &hyper).unwrap();
    }
    let first = dir.path().join("a.json");
    let second = dir.path().join("b.json");
    save_checkpoint(&Checkpoint::from_state(&state, &cfg.hash(), true), &first).unwrap();
    let loaded = load_checkpoint(&first).unwrap();
    save_checkpoint(&loaded, &second).unwrap();
    let identical = std::fs::read(&first).unwrap() == std::fs::read(&second).unwrap();

    cfg.mode = Mode::Finetune;
    cfg.sd.alpha = 1.0;
    cfg.finetune.compare_baseline = false;
    cfg.training.steps = 1_000;
    cfg.training.eval_interval = 500;
    cfg.training.save_checkpoints = false;
    let (records, _) = match run_finetune(&cfg, &loaded, dir.path(), 1) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("fine-tune failed: {e}")),
    };
    let r = &records[0];
    let ok = !r.diverged
        && r.final_step == r.start_step + 1_000
        && r.rows.iter().all(|m| m.frechet_data.is_finite());
    outcome(
        identical && ok,
        format!(
            "save/load/save identical: {identical}, fine-tune steps {}..{} diverged: {}",
            r.start_step, r.final_step, r.diverged
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("routh-hurwitz grid", routh_hurwitz_grid),
        ("characteristic coefficients", coefficient_identity),
        ("stability margin identity", margin_identity),
        ("dirac phenomenology", dirac_phenomenology),
        ("autodiff vs finite differences", autodiff_soundness),
        ("ema closed form", ema_closed_form),
        ("teacher gradient stop", gradient_stop),
        ("alpha=0 baseline equivalence", baseline_equivalence),
        ("frechet distance", frechet_metric),
        ("directional sd benefit", directional_benefit),
        ("checkpoint round trip + fine-tune", checkpoint_round_trip),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let n = i + 1;
        if only.is_some_and(|o| o != n) {
            continue;
        }
        let o = check();
        println!(
            "[{}] {n:>2} {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        if !o.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
