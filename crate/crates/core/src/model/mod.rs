//! Graph encoder, conditioned denoiser and scoring head.

mod condition;
mod denoiser;
mod encoder;
mod network;
mod params;
mod score;

use serde::{Deserialize, Serialize};

use crate::diffusion::NoiseMode;
use crate::error::{Error, Result};

pub use condition::{build_condition, ConditionOperator};
pub use denoiser::{attention_weights, denoise, step_embedding, DenoiserInput};
pub use encoder::{encode, encode_on_tape};
pub use network::{DiffGt, ForwardPass, GraphContext, InferenceOptions, NoiseInput};
pub use params::{xavier_uniform, ParamStore};
pub use score::{mask_items, score, top_k};

/// What follows the step embedding and conditioning in the denoiser.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DenoiserKind {
    Transformer,
    /// One trainable d×d matrix, initialised to the identity.
    WeightedMatrix,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttentionKind {
    /// Keys and values pooled to `projected_len` rows by learned convex
    /// combinations of the tokens.
    Linear,
    Full,
}

/// Which embeddings the ranking head reads.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreOn {
    Denoised,
    Encoded,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub dim: usize,
    pub encoder_layers: usize,
    pub denoiser_layers: usize,
    pub projected_len: usize,
    pub steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    /// Reverse steps taken at inference.
    pub reverse_samples: usize,
    pub noise: NoiseMode,
    pub condition: bool,
    pub denoiser: DenoiserKind,
    pub attention: AttentionKind,
    pub score_on: ScoreOn,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            dim: 64,
            encoder_layers: 2,
            denoiser_layers: 2,
            projected_len: 64,
            steps: 50,
            beta_start: 1e-4,
            beta_end: 0.02,
            reverse_samples: 5,
            noise: NoiseMode::Directional,
            condition: true,
            denoiser: DenoiserKind::Transformer,
            attention: AttentionKind::Linear,
            score_on: ScoreOn::Denoised,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.projected_len == 0 {
            return Err(Error::Config("dim and projected_len must be positive".into()));
        }
        if self.reverse_samples == 0 || self.reverse_samples > self.steps {
            return Err(Error::Config(format!(
                "reverse_samples must be in 1..={}, got {}",
                self.steps, self.reverse_samples
            )));
        }
        crate::diffusion::make_schedule(self.steps, self.beta_start, self.beta_end).map(|_| ())
    }
}
