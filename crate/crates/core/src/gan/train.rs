use serde::{Deserialize, Serialize};

use super::ema::EmaTracker;
use super::loss::{discriminator_loss, generator_adv_loss, sd_loss, SdLossSpec};
use super::mlp::{Architecture, MlpParams};
use super::GanError;
use crate::optim::Adam;
use crate::rng::Rng;
use crate::tensor::{Graph, Tensor};

// Sub-stream ids forked from the run seed.
const STREAM_INIT: u64 = 1;
const STREAM_TRAIN: u64 = 2;
const STREAM_AUGMENT: u64 = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainHyper {
    pub lr_g: f64,
    pub lr_d: f64,
    pub adam_betas: (f64, f64),
    pub adam_eps: f64,
    pub batch_size: usize,
    pub latent_dim: usize,
    /// Spatial scale of the data, for augmentation translations.
    pub data_scale: f64,
}

impl Default for TrainHyper {
    fn default() -> Self {
        Self {
            lr_g: 1e-3,
            lr_d: 1e-3,
            adam_betas: (0.5, 0.999),
            adam_eps: 1e-8,
            batch_size: 128,
            latent_dim: 2,
            data_scale: 2.0,
        }
    }
}

/// Everything a training run mutates.
#[derive(Clone, Debug, PartialEq)]
pub struct GanState {
    pub generator: MlpParams,
    pub discriminator: MlpParams,
    pub ema: EmaTracker,
    pub opt_g: Adam,
    pub opt_d: Adam,
    /// Latents and real batches.
    pub rng: Rng,
    /// Augmentation draws only, so the SD branch never perturbs `rng`.
    pub aug_rng: Rng,
    /// Seed the random streams were derived from.
    pub seed: u64,
    pub step: u64,
}

impl GanState {
    pub fn new(
        g_arch: &Architecture,
        d_arch: &Architecture,
        ema_beta: f64,
        hyper: &TrainHyper,
        seed: u64,
    ) -> Result<Self, GanError> {
        let root = Rng::seed(seed);
        let mut init = root.fork(STREAM_INIT);
        let generator = MlpParams::init(g_arch, &mut init);
        let discriminator = MlpParams::init(d_arch, &mut init);
        Self::from_parts(generator, discriminator, None, ema_beta, hyper, seed)
    }

    /// Assembles a state from existing weights. Without `ema_shadow` the
    /// shadow starts as a copy of the generator.
    pub fn from_parts(
        generator: MlpParams,
        discriminator: MlpParams,
        ema_shadow: Option<MlpParams>,
        ema_beta: f64,
        hyper: &TrainHyper,
        seed: u64,
    ) -> Result<Self, GanError> {
        let ema = match ema_shadow {
            Some(s) => EmaTracker::from_shadow(ema_beta, s)?,
            None => EmaTracker::new(ema_beta, &generator)?,
        };
        let root = Rng::seed(seed);
        Ok(Self {
            generator,
            discriminator,
            ema,
            opt_g: Adam::new(hyper.lr_g, hyper.adam_betas, hyper.adam_eps),
            opt_d: Adam::new(hyper.lr_d, hyper.adam_betas, hyper.adam_eps),
            rng: root.fork(STREAM_TRAIN),
            aug_rng: root.fork(STREAM_AUGMENT),
            seed,
            step: 0,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub step: u64,
    pub loss_d: f64,
    pub loss_g_adv: f64,
    /// Computed whenever an SD spec is present, even at `alpha = 0`
    /// where it only serves as a monitor.
    pub loss_sd: Option<f64>,
    pub grad_norm_g: f64,
    pub grad_norm_d: f64,
    /// Norm of the gradient reaching the EMA shadow; zero by construction.
    pub teacher_grad_norm: f64,
}

fn finite(v: f64, what: &'static str, step: u64) -> Result<f64, GanError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(GanError::Diverged { what, step })
    }
}

/// One discriminator update, one generator update, one EMA update.
///
/// The generator objective is `L_adv + alpha · L_SD(T(G(z)), T(G_ema(z)))`
/// with the teacher queried on the same `z` and detached. `sd = None`
/// removes the SD branch entirely.
pub fn train_step(
    state: &mut GanState,
    batch_real: &Tensor,
    sd: Option<&SdLossSpec>,
    hyper: &TrainHyper,
) -> Result<StepLog, GanError> {
    let n = batch_real.rows();
    let step = state.step + 1;

    // discriminator
    let z = state.rng.normal_tensor(n, hyper.latent_dim);
    let fake = state.generator.forward_plain(&z)?;
    let mut g = Graph::new();
    let d = state.discriminator.bind(&mut g);
    let real = g.constant(batch_real.clone());
    let fake = g.constant(fake);
    let d_real = d.forward(&mut g, real)?;
    let d_fake = d.forward(&mut g, fake)?;
    let loss_d = discriminator_loss(&mut g, d_real, d_fake);
    let loss_d_val = finite(g.value(loss_d).item(), "loss_D", step)?;
    g.backward(loss_d)?;
    let grad_norm_d = d.grad_norm(&g);
    let grads = d.grads(&g);
    drop(g);
    state
        .opt_d
        .step(&mut state.discriminator.tensors_mut(), &grads)?;

    // generator
    let z = state.rng.normal_tensor(n, hyper.latent_dim);
    let mut g = Graph::new();
    let gen = state.generator.bind(&mut g);
    let disc = state.discriminator.bind_frozen(&mut g);
    let zv = g.constant(z);
    let fake = gen.forward(&mut g, zv)?;
    let d_fake = disc.forward(&mut g, fake)?;
    let loss_adv = generator_adv_loss(&mut g, d_fake);
    let loss_adv_val = finite(g.value(loss_adv).item(), "loss_G_adv", step)?;

    let mut teacher = None;
    let mut loss_sd_val = None;
    let mut total = loss_adv;
    if let Some(spec) = sd {
        // Shadow weights are bound as trainable leaves only so the
        // gradient stop can be observed.
        let shadow = state.ema.shadow.bind(&mut g);
        let t_out = shadow.forward(&mut g, zv)?;
        let t_out = g.detach(t_out);
        let l_sd = sd_loss(
            &mut g,
            fake,
            t_out,
            spec,
            &mut state.aug_rng,
            hyper.data_scale,
        )?;
        loss_sd_val = Some(finite(g.value(l_sd).item(), "loss_SD", step)?);
        if spec.alpha > 0.0 {
            let weighted = g.mul_scalar(l_sd, spec.alpha);
            total = g.add(loss_adv, weighted)?;
        }
        teacher = Some(shadow);
    }
    finite(g.value(total).item(), "loss_G", step)?;
    g.backward(total)?;
    let grad_norm_g = gen.grad_norm(&g);
    let teacher_grad_norm = teacher.map_or(0.0, |t| t.grad_norm(&g));
    let grads = gen.grads(&g);
    drop(g);
    state
        .opt_g
        .step(&mut state.generator.tensors_mut(), &grads)?;

    state.ema.update(&state.generator)?;
    state.step = step;

    Ok(StepLog {
        step,
        loss_d: loss_d_val,
        loss_g_adv: loss_adv_val,
        loss_sd: loss_sd_val,
        grad_norm_g,
        grad_norm_d,
        teacher_grad_norm,
    })
}
