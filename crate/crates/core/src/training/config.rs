use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::diffusion::NoiseMode;
use crate::error::{Error, Result};
use crate::model::{DenoiserKind, InferenceOptions, ModelConfig};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    /// λ₁
    pub diffusion: f64,
    /// λ₂
    pub contrastive: f64,
    /// τ
    pub temperature: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            diffusion: 0.5,
            contrastive: 0.1,
            temperature: 0.2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub seed: u64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub weights: LossWeights,
    pub side_info: bool,
    pub side_top_n: usize,
    /// Users and items per class entering the contrastive term.
    pub contrastive_sample: usize,
    pub model: ModelConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 2024,
            learning_rate: 1e-3,
            batch_size: 2048,
            max_epochs: 1000,
            patience: 50,
            weights: LossWeights::default(),
            side_info: true,
            side_top_n: 10,
            contrastive_sample: 256,
            model: ModelConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let w = &self.weights;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.contrastive_sample == 0 {
            return Err(Error::Config("batch_size, max_epochs and contrastive_sample must be positive".into()));
        }
        if !(w.diffusion >= 0.0 && w.contrastive >= 0.0 && w.diffusion.is_finite() && w.contrastive.is_finite()) {
            return Err(Error::Config("loss weights must be finite and >= 0".into()));
        }
        if !(w.temperature > 0.0 && w.temperature.is_finite()) {
            return Err(Error::Config(format!("temperature must be positive, got {}", w.temperature)));
        }
        self.model.validate()
    }

    /// Inference settings shared by validation and evaluation.
    pub fn inference(&self) -> InferenceOptions {
        InferenceOptions::new(self.seed ^ 0x5DEE_CE66_D1CE_4E5B)
    }
}

/// Ablation switches; each removes one component from the full model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    Full,
    NoDirection,
    NoCondition,
    NoTransformer,
    NoSide,
    NoCl,
    NoDiffL,
}

impl Variant {
    pub const ALL: [Variant; 7] = [
        Variant::Full,
        Variant::NoDirection,
        Variant::NoCondition,
        Variant::NoTransformer,
        Variant::NoSide,
        Variant::NoCl,
        Variant::NoDiffL,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoDirection => "-Direction",
            Variant::NoCondition => "-Condition",
            Variant::NoTransformer => "-Transformer",
            Variant::NoSide => "-Side",
            Variant::NoCl => "-CL",
            Variant::NoDiffL => "-DiffL",
        }
    }

    pub fn apply(self, base: &TrainConfig) -> TrainConfig {
        let mut cfg = base.clone();
        match self {
            Variant::Full => {}
            Variant::NoDirection => cfg.model.noise = NoiseMode::Isotropic,
            Variant::NoCondition => cfg.model.condition = false,
            Variant::NoTransformer => cfg.model.denoiser = DenoiserKind::WeightedMatrix,
            Variant::NoSide => cfg.side_info = false,
            Variant::NoCl => cfg.weights.contrastive = 0.0,
            Variant::NoDiffL => cfg.weights.diffusion = 0.0,
        }
        cfg
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                let names: Vec<_> = Variant::ALL.iter().map(|v| v.name()).collect();
                Error::Config(format!("unknown variant {s:?}; expected one of {}", names.join(", ")))
            })
    }
}
