use serde::{Deserialize, Serialize};

use super::mlp::MlpParams;
use super::GanError;
use crate::rng::Rng;
use crate::tensor::{Graph, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SdKind {
    L1,
    L2,
    /// Squared distance between embeddings of a frozen random network.
    Feature,
}

impl SdKind {
    pub fn name(self) -> &'static str {
        match self {
            SdKind::L1 => "l1",
            SdKind::L2 => "l2",
            SdKind::Feature => "feature",
        }
    }
}

/// Self-distillation term of the generator objective.
#[derive(Clone, Debug, PartialEq)]
pub struct SdLossSpec {
    pub kind: SdKind,
    pub alpha: f64,
    /// Required iff `kind == Feature`. Never trained.
    pub feature_net: Option<MlpParams>,
    pub augment: bool,
}

impl SdLossSpec {
    pub fn new(
        kind: SdKind,
        alpha: f64,
        augment: bool,
        feature_net: Option<MlpParams>,
    ) -> Result<Self, GanError> {
        let spec = Self {
            kind,
            alpha,
            feature_net,
            augment,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), GanError> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(GanError::Config(format!(
                "sd.alpha must be >= 0, got {}",
                self.alpha
            )));
        }
        if self.kind == SdKind::Feature && self.feature_net.is_none() {
            return Err(GanError::Config(
                "sd.kind = feature requires a feature network".into(),
            ));
        }
        Ok(())
    }
}

/// Non-saturating logistic discriminator loss,
/// `mean softplus(-d_real) + mean softplus(d_fake)`.
pub fn discriminator_loss(g: &mut Graph, d_real: Var, d_fake: Var) -> Var {
    let nr = g.neg(d_real);
    let sr = g.softplus(nr);
    let lr = g.mean(sr);
    let sf = g.softplus(d_fake);
    let lf = g.mean(sf);
    g.add(lr, lf).expect("scalar means")
}

/// Non-saturating generator loss, `mean softplus(-d_fake)`.
pub fn generator_adv_loss(g: &mut Graph, d_fake: Var) -> Var {
    let n = g.neg(d_fake);
    let s = g.softplus(n);
    g.mean(s)
}

/// `(loss_D, loss_G_adv)` on the same graph.
pub fn adversarial_losses(g: &mut Graph, d_real: Var, d_fake: Var) -> (Var, Var) {
    (
        discriminator_loss(g, d_real, d_fake),
        generator_adv_loss(g, d_fake),
    )
}

/// Row-vector affine map `x -> x·m + t` on 2-D points.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Affine2 {
    pub m: [[f64; 2]; 2],
    pub t: [f64; 2],
}

impl Affine2 {
    pub const IDENTITY: Affine2 = Affine2 {
        m: [[1.0, 0.0], [0.0, 1.0]],
        t: [0.0, 0.0],
    };

    /// Reflection across the line through the origin at angle `axis`.
    pub fn reflection(axis: f64) -> Self {
        let (s, c) = (2.0 * axis).sin_cos();
        Self {
            m: [[c, s], [s, -c]],
            t: [0.0, 0.0],
        }
    }

    pub fn rotation(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self {
            m: [[c, s], [-s, c]],
            t: [0.0, 0.0],
        }
    }

    pub fn translation(dx: f64, dy: f64) -> Self {
        Self {
            t: [dx, dy],
            ..Self::IDENTITY
        }
    }

    /// `self` followed by `next`.
    pub fn then(&self, next: &Affine2) -> Affine2 {
        let a = &self.m;
        let b = &next.m;
        let m = [
            [
                a[0][0] * b[0][0] + a[0][1] * b[1][0],
                a[0][0] * b[0][1] + a[0][1] * b[1][1],
            ],
            [
                a[1][0] * b[0][0] + a[1][1] * b[1][0],
                a[1][0] * b[0][1] + a[1][1] * b[1][1],
            ],
        ];
        let t = [
            self.t[0] * b[0][0] + self.t[1] * b[1][0] + next.t[0],
            self.t[0] * b[0][1] + self.t[1] * b[1][1] + next.t[1],
        ];
        Affine2 { m, t }
    }

    pub fn apply_point(&self, p: [f64; 2]) -> [f64; 2] {
        [
            p[0] * self.m[0][0] + p[1] * self.m[1][0] + self.t[0],
            p[0] * self.m[0][1] + p[1] * self.m[1][1] + self.t[1],
        ]
    }

    /// Differentiable application to an `[n, 2]` node.
    pub fn apply(&self, g: &mut Graph, x: Var) -> Result<Var, GanError> {
        let m = g.constant(Tensor::raw(
            vec![2, 2],
            vec![self.m[0][0], self.m[0][1], self.m[1][0], self.m[1][1]],
        ));
        let t = g.constant(Tensor::raw(vec![2], self.t.to_vec()));
        let y = g.matmul(x, m)?;
        Ok(g.add_row(y, t)?)
    }
}

const ROTATION_DEG: f64 = 5.0;
const TRANSLATE_FRAC: f64 = 0.01;
const APPLY_P: f64 = 0.5;
const RANDOM_APPLY: usize = 2;

/// Draws one batch-level transform: two of {reflection, rotation,
/// translation} are picked without replacement (kept in that order), and
/// each picked one fires with probability 0.5.
pub fn sample_augment(rng: &mut Rng, data_scale: f64) -> Affine2 {
    let skip = rng.below(3);
    debug_assert_eq!(RANDOM_APPLY, 2);
    let mut out = Affine2::IDENTITY;
    for which in (0..3).filter(|&k| k != skip) {
        if !rng.bernoulli(APPLY_P) {
            continue;
        }
        let step = match which {
            0 => Affine2::reflection(rng.uniform_in(0.0, std::f64::consts::PI)),
            1 => Affine2::rotation(rng.uniform_in(-ROTATION_DEG, ROTATION_DEG).to_radians()),
            _ => {
                let r = TRANSLATE_FRAC * data_scale;
                Affine2::translation(rng.uniform_in(-r, r), rng.uniform_in(-r, r))
            }
        };
        out = out.then(&step);
    }
    out
}

/// Applies one shared random transform to both batches. Disabled: returns
/// the inputs untouched and draws nothing.
pub fn shared_augment(
    g: &mut Graph,
    a: Var,
    b: Var,
    rng: &mut Rng,
    enabled: bool,
    data_scale: f64,
) -> Result<(Var, Var), GanError> {
    if !enabled {
        return Ok((a, b));
    }
    if g.value(a).shape() != g.value(b).shape() {
        return Err(GanError::Shape(format!(
            "shared_augment: {:?} vs {:?}",
            g.value(a).shape(),
            g.value(b).shape()
        )));
    }
    let tf = sample_augment(rng, data_scale);
    Ok((tf.apply(g, a)?, tf.apply(g, b)?))
}

/// Self-distillation loss between a student batch and a detached teacher
/// batch, after the optional shared augmentation.
pub fn sd_loss(
    g: &mut Graph,
    student: Var,
    teacher: Var,
    spec: &SdLossSpec,
    rng: &mut Rng,
    data_scale: f64,
) -> Result<Var, GanError> {
    if g.requires_grad(teacher) {
        return Err(GanError::Config(
            "sd_loss: teacher output must be detached".into(),
        ));
    }
    if g.value(student).shape() != g.value(teacher).shape() {
        return Err(GanError::Shape(format!(
            "sd_loss: student {:?} vs teacher {:?}",
            g.value(student).shape(),
            g.value(teacher).shape()
        )));
    }
    let (a, b) = shared_augment(g, student, teacher, rng, spec.augment, data_scale)?;
    let (a, b) = match spec.kind {
        SdKind::Feature => {
            let net = spec.feature_net.as_ref().ok_or_else(|| {
                GanError::Config("sd.kind = feature requires a feature network".into())
            })?;
            let f = net.bind_frozen(g);
            (f.forward(g, a)?, f.forward(g, b)?)
        }
        _ => (a, b),
    };
    let d = g.sub(a, b)?;
    let e = match spec.kind {
        SdKind::L1 => g.abs(d),
        SdKind::L2 | SdKind::Feature => g.square(d),
    };
    Ok(g.mean(e))
}

/// Per-row SD distance without augmentation, computed outside any graph.
pub fn per_sample_sd(
    student: &Tensor,
    teacher: &Tensor,
    spec: &SdLossSpec,
) -> Result<Vec<f64>, GanError> {
    if student.shape() != teacher.shape() {
        return Err(GanError::Shape(format!(
            "per_sample_sd: {:?} vs {:?}",
            student.shape(),
            teacher.shape()
        )));
    }
    let (a, b) = match spec.kind {
        SdKind::Feature => {
            let net = spec.feature_net.as_ref().ok_or_else(|| {
                GanError::Config("sd.kind = feature requires a feature network".into())
            })?;
            (net.forward_plain(student)?, net.forward_plain(teacher)?)
        }
        _ => (student.clone(), teacher.clone()),
    };
    let cols = a.cols();
    Ok((0..a.rows())
        .map(|i| {
            let s: f64 = a
                .row(i)
                .iter()
                .zip(b.row(i))
                .map(|(x, y)| match spec.kind {
                    SdKind::L1 => (x - y).abs(),
                    _ => (x - y) * (x - y),
                })
                .sum();
            s / cols as f64
        })
        .collect())
}
