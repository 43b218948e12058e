//! Evaluation at toy scale: Gaussian Fréchet distances in data and
//! random-feature space, mode coverage, checkpoint-trajectory variance and
//! joint SD / discriminator ranking.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gan::{per_sample_sd, DataSpec, GanError, MlpParams, SdKind, SdLossSpec};
use crate::tensor::{Tensor, TensorError};

/// Ridge added to sample covariances before any square root.
pub const COV_SHRINKAGE: f64 = 1e-6;
/// Eigenvalues down to this are treated as round-off and clamped to zero.
pub const PSD_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("dimension mismatch: {0} vs {1}")]
    Dim(usize, usize),
    #[error("covariance is not positive semidefinite (eigenvalue {0})")]
    NotPsd(f64),
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Gan(#[from] GanError),
}

pub type Result<T> = std::result::Result<T, MetricsError>;

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianFit {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianFit {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
            return Err(MetricsError::Dim(mean.len(), cov.nrows()));
        }
        Ok(Self {
            mean,
            cov: (&cov + cov.transpose()) * 0.5,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Sample mean and unbiased covariance of the rows of `x`, plus
    /// `shrinkage·I`.
    pub fn from_samples(x: &Tensor, shrinkage: f64) -> Result<Self> {
        let (n, d) = (x.rows(), x.cols());
        if n < 2 {
            return Err(MetricsError::TooFewSamples { need: 2, got: n });
        }
        let m = DMatrix::from_row_slice(n, d, x.data());
        let mean = m.row_mean().transpose();
        let mut centered = m;
        for mut row in centered.row_iter_mut() {
            row -= mean.transpose();
        }
        let mut cov = centered.transpose() * &centered / (n as f64 - 1.0);
        for i in 0..d {
            cov[(i, i)] += shrinkage;
        }
        Self::new(mean, cov)
    }
}

fn psd_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(m.clone());
    let mut vals = eig.eigenvalues.clone();
    for v in vals.iter_mut() {
        if *v < -PSD_TOLERANCE {
            return Err(MetricsError::NotPsd(*v));
        }
        *v = v.max(0.0).sqrt();
    }
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose())
}

fn trace_sqrt(m: &DMatrix<f64>) -> Result<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let mut total = 0.0;
    for v in SymmetricEigen::new(sym).eigenvalues.iter() {
        if *v < -PSD_TOLERANCE {
            return Err(MetricsError::NotPsd(*v));
        }
        total += v.max(0.0).sqrt();
    }
    Ok(total)
}

/// Squared Fréchet (2-Wasserstein) distance between two Gaussians,
/// `|m1 - m2|² + tr(C1 + C2 - 2 (C1 C2)^½)`.
///
/// `tr (C1 C2)^½` is taken as `tr (S C2 S)^½` with `S = C1^½`, which keeps
/// the argument symmetric.
pub fn frechet_distance(a: &GaussianFit, b: &GaussianFit) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(MetricsError::Dim(a.dim(), b.dim()));
    }
    if a == b {
        return Ok(0.0);
    }
    let s = psd_sqrt(&a.cov)?;
    psd_sqrt(&b.cov)?;
    let cross = trace_sqrt(&(&s * &b.cov * &s))?;
    let dm = (&a.mean - &b.mean).norm_squared();
    Ok((dm + a.cov.trace() + b.cov.trace() - 2.0 * cross).max(0.0))
}

/// Fréchet distance between raw sample sets.
pub fn data_frechet(samples_a: &Tensor, samples_b: &Tensor) -> Result<f64> {
    let fa = GaussianFit::from_samples(samples_a, COV_SHRINKAGE)?;
    let fb = GaussianFit::from_samples(samples_b, COV_SHRINKAGE)?;
    frechet_distance(&fa, &fb)
}

/// Fréchet distance between embeddings of a frozen, untrained network.
pub fn random_feature_frechet(
    samples_a: &Tensor,
    samples_b: &Tensor,
    feature_net: &MlpParams,
) -> Result<f64> {
    if samples_a.cols() != samples_b.cols() {
        return Err(MetricsError::Dim(samples_a.cols(), samples_b.cols()));
    }
    let ea = feature_net.forward_plain(samples_a)?;
    let eb = feature_net.forward_plain(samples_b)?;
    data_frechet(&ea, &eb)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeCoverage {
    pub modes_hit: usize,
    pub high_quality_fraction: f64,
}

/// A sample is high quality when it lies within `threshold_std·mode_std`
/// of some mode mean; a mode is hit when it is the nearest mode of at
/// least one high-quality sample.
pub fn mode_coverage(samples: &Tensor, data: &DataSpec, threshold_std: f64) -> ModeCoverage {
    let means = data.means();
    let radius = threshold_std * data.mode_std;
    let mut hit = vec![false; means.len()];
    let mut good = 0usize;
    for i in 0..samples.rows() {
        let p = samples.row(i);
        let (best, dist) = means
            .iter()
            .enumerate()
            .map(|(k, m)| (k, (p[0] - m[0]).hypot(p[1] - m[1])))
            .fold(
                (0, f64::INFINITY),
                |acc, x| if x.1 < acc.1 { x } else { acc },
            );
        if dist <= radius {
            good += 1;
            hit[best] = true;
        }
    }
    ModeCoverage {
        modes_hit: hit.iter().filter(|&&h| h).count(),
        high_quality_fraction: if samples.rows() == 0 {
            0.0
        } else {
            good as f64 / samples.rows() as f64
        },
    }
}

/// Generator snapshots taken along one training run, evaluated on a fixed
/// latent set.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckpointSeries {
    pub snapshots: Vec<MlpParams>,
    pub latents: Tensor,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Population statistics; empty input gives zeros.
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self {
                mean: 0.0,
                std: 0.0,
            };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Self {
            mean,
            std: var.sqrt(),
        }
    }
}

/// Per-row distance between two output batches: `Σ|a-b|` for L1, `Σ(a-b)²`
/// for L2, and `Σ(f(a)-f(b))²` over the frozen embedding for Feature.
pub fn row_distances(
    a: &Tensor,
    b: &Tensor,
    kind: SdKind,
    feature_net: Option<&MlpParams>,
) -> Result<Vec<f64>> {
    let (a, b) = match kind {
        SdKind::Feature => {
            let net = feature_net.ok_or_else(|| {
                MetricsError::Invalid("feature distance needs a feature network".into())
            })?;
            (net.forward_plain(a)?, net.forward_plain(b)?)
        }
        _ => (a.clone(), b.clone()),
    };
    if a.shape() != b.shape() {
        return Err(MetricsError::Dim(a.cols(), b.cols()));
    }
    Ok((0..a.rows())
        .map(|i| {
            a.row(i)
                .iter()
                .zip(b.row(i))
                .map(|(x, y)| {
                    if kind == SdKind::L1 {
                        (x - y).abs()
                    } else {
                        (x - y) * (x - y)
                    }
                })
                .sum()
        })
        .collect())
}

/// For each latent, the mean distance between outputs of consecutive
/// snapshots; returns mean and std over latents.
pub fn trajectory_variance(
    series: &CheckpointSeries,
    kind: SdKind,
    feature_net: Option<&MlpParams>,
) -> Result<MeanStd> {
    if series.snapshots.len() < 2 {
        return Err(MetricsError::TooFewSamples {
            need: 2,
            got: series.snapshots.len(),
        });
    }
    let outputs = series
        .snapshots
        .iter()
        .map(|g| g.forward_plain(&series.latents))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let pairs = (outputs.len() - 1) as f64;
    let mut per_latent = vec![0.0; series.latents.rows()];
    for w in outputs.windows(2) {
        for (acc, d) in per_latent
            .iter_mut()
            .zip(row_distances(&w[0], &w[1], kind, feature_net)?)
        {
            *acc += d;
        }
    }
    per_latent.iter_mut().for_each(|v| *v /= pairs);
    Ok(MeanStd::of(&per_latent))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtremeGroup {
    HighSdHighD,
    HighSdLowD,
    LowSdHighD,
    LowSdLowD,
}

impl ExtremeGroup {
    pub const ALL: [ExtremeGroup; 4] = [
        ExtremeGroup::HighSdHighD,
        ExtremeGroup::HighSdLowD,
        ExtremeGroup::LowSdHighD,
        ExtremeGroup::LowSdLowD,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            ExtremeGroup::HighSdHighD => "high_sd_high_d",
            ExtremeGroup::HighSdLowD => "high_sd_low_d",
            ExtremeGroup::LowSdHighD => "low_sd_high_d",
            ExtremeGroup::LowSdLowD => "low_sd_low_d",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct JointRanking {
    /// Per-latent SD distance between student and teacher outputs.
    pub sd_distance: Vec<f64>,
    /// Per-latent discriminator logit on the teacher output.
    pub d_score: Vec<f64>,
    /// Teacher outputs, one row per latent.
    pub samples: Tensor,
    pub groups: Vec<(ExtremeGroup, Vec<usize>)>,
}

fn order_by(values: &[f64], idx: &[usize], descending: bool) -> Vec<usize> {
    let mut v = idx.to_vec();
    v.sort_by(|&a, &b| {
        let o = values[a].total_cmp(&values[b]);
        (if descending { o.reverse() } else { o }).then(a.cmp(&b))
    });
    v
}

/// Nested extreme selection: the `k_sd` latents with largest and smallest
/// SD distance, then within each of those the `k_d` with highest and
/// lowest discriminator score. Ties break by latent index.
pub fn rank_joint_extremes(
    generator: &MlpParams,
    ema_shadow: &MlpParams,
    discriminator: &MlpParams,
    latents: &Tensor,
    k_sd: usize,
    k_d: usize,
    spec: &SdLossSpec,
) -> Result<JointRanking> {
    let n = latents.rows();
    if k_d == 0 || k_sd < 2 * k_d || n < 2 * k_sd {
        return Err(MetricsError::Invalid(format!(
            "need n >= 2·k_sd and k_sd >= 2·k_d > 0, got n={n}, k_sd={k_sd}, k_d={k_d}"
        )));
    }
    let student = generator.forward_plain(latents)?;
    let teacher = ema_shadow.forward_plain(latents)?;
    let sd_distance = per_sample_sd(&student, &teacher, spec)?;
    let d_score = discriminator.forward_plain(&teacher)?.into_data();
    let all: Vec<usize> = (0..n).collect();
    let by_sd = order_by(&sd_distance, &all, true);
    let high_sd = &by_sd[..k_sd];
    let low_sd = &by_sd[n - k_sd..];
    let pick = |pool: &[usize], high: bool| order_by(&d_score, pool, high)[..k_d].to_vec();
    let groups = vec![
        (ExtremeGroup::HighSdHighD, pick(high_sd, true)),
        (ExtremeGroup::HighSdLowD, pick(high_sd, false)),
        (ExtremeGroup::LowSdHighD, pick(low_sd, true)),
        (ExtremeGroup::LowSdLowD, pick(low_sd, false)),
    ];
    Ok(JointRanking {
        sd_distance,
        d_score,
        samples: teacher,
        groups,
    })
}
