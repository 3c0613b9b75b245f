use serde::{Deserialize, Serialize};

use super::NoiseSchedule;
use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, RandomSource};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseMode {
    Isotropic,
    Directional,
}

impl NoiseMode {
    pub fn label(self) -> &'static str {
        match self {
            NoiseMode::Isotropic => "isotropic",
            NoiseMode::Directional => "directional",
        }
    }
}

/// Per-column empirical mean and standard deviation of an embedding table.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NoiseStats {
    pub fn of(embeddings: &DenseMatrix) -> Self {
        Self {
            mean: embeddings.column_means(),
            std: embeddings.column_stds(),
        }
    }
}

/// Noise generator for the forward process.
#[derive(Clone, Debug)]
pub enum NoiseKind {
    Isotropic,
    Directional(NoiseStats),
}

impl NoiseKind {
    /// Directional noise takes its statistics from `table`.
    pub fn new(mode: NoiseMode, table: &DenseMatrix) -> Self {
        match mode {
            NoiseMode::Isotropic => NoiseKind::Isotropic,
            NoiseMode::Directional => NoiseKind::Directional(NoiseStats::of(table)),
        }
    }

    pub fn mode(&self) -> NoiseMode {
        match self {
            NoiseKind::Isotropic => NoiseMode::Isotropic,
            NoiseKind::Directional(_) => NoiseMode::Directional,
        }
    }

    pub fn sample(&self, x0: &DenseMatrix, rng: &mut RandomSource) -> Result<DenseMatrix> {
        match self {
            NoiseKind::Isotropic => Ok(rng.standard_normal(x0.rows(), x0.cols())),
            NoiseKind::Directional(stats) => directional_noise(x0, rng, &stats.mean, &stats.std),
        }
    }
}

/// `+1` for non-negative input so a zero coordinate still receives noise.
#[inline]
pub fn sign(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// ε′ = sgn(x₀) ⊙ |μ + σ ⊙ ε| with ε standard normal.
pub fn directional_noise(
    x0: &DenseMatrix,
    rng: &mut RandomSource,
    mu: &[f64],
    sigma: &[f64],
) -> Result<DenseMatrix> {
    check_stats(x0, mu, sigma)?;
    let raw = rng.standard_normal(x0.rows(), x0.cols());
    align_noise(x0, &raw, mu, sigma)
}

/// The deterministic part of [`directional_noise`] for a given raw draw.
pub fn align_noise(x0: &DenseMatrix, raw: &DenseMatrix, mu: &[f64], sigma: &[f64]) -> Result<DenseMatrix> {
    check_stats(x0, mu, sigma)?;
    if raw.shape() != x0.shape() {
        return Err(Error::shape("align_noise", x0.shape(), raw.shape()));
    }
    let d = x0.cols();
    let mut out = raw.clone();
    for r in 0..x0.rows() {
        let signs = x0.row(r);
        for (c, v) in out.row_mut(r).iter_mut().enumerate() {
            *v = sign(signs[c]) * (mu[c] + sigma[c] * *v).abs();
        }
        debug_assert_eq!(signs.len(), d);
    }
    Ok(out)
}

fn check_stats(x0: &DenseMatrix, mu: &[f64], sigma: &[f64]) -> Result<()> {
    if mu.len() != x0.cols() || sigma.len() != x0.cols() {
        return Err(Error::shape("directional_noise", x0.shape(), (mu.len(), sigma.len())));
    }
    if mu.iter().chain(sigma).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("noise statistics"));
    }
    if sigma.iter().any(|&s| s < 0.0) {
        return Err(Error::Config("noise standard deviations must be >= 0".into()));
    }
    Ok(())
}

/// A noised embedding snapshot.
#[derive(Clone, Debug)]
pub struct DiffusionBatch {
    pub x_t: DenseMatrix,
    pub t: usize,
    pub noise: DenseMatrix,
}

/// x_t = √ᾱ_t · x₀ + √(1 − ᾱ_t) · noise, for a pre-drawn noise matrix.
pub fn diffuse_with(x0: &DenseMatrix, noise: &DenseMatrix, t: usize, sched: &NoiseSchedule) -> Result<DenseMatrix> {
    sched.check_step(t)?;
    let ab = sched.alpha_bar(t);
    let (keep, add) = (ab.sqrt(), (1.0 - ab).sqrt());
    x0.zip_map(noise, |x, e| keep * x + add * e)
}

pub fn forward_diffuse(
    x0: &DenseMatrix,
    t: usize,
    sched: &NoiseSchedule,
    noise: &NoiseKind,
    rng: &mut RandomSource,
) -> Result<DiffusionBatch> {
    sched.check_step(t)?;
    let eps = noise.sample(x0, rng)?;
    Ok(DiffusionBatch {
        x_t: diffuse_with(x0, &eps, t, sched)?,
        t,
        noise: eps,
    })
}
