use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::denoiser::{compresses, init_params};
use super::{denoise, encode, encode_on_tape, xavier_uniform, AttentionKind, ConditionOperator, DenoiserInput};
use super::{DenoiserKind, ModelConfig, ParamStore, ScoreOn};
use crate::diffusion::{combine, forward_diffuse, make_schedule, sample_reverse_steps, NoiseKind, NoiseSchedule};
use crate::error::{Error, Result};
use crate::graph::{normalize_adjacency, InteractionGraph};
use crate::numerics::{CsrMatrix, DenseMatrix, GradientTape, ParamId, RandomSource, Var};

/// Read-only graph operators shared by every forward pass.
#[derive(Clone, Debug)]
pub struct GraphContext {
    pub adjacency: Arc<CsrMatrix>,
    pub condition: ConditionOperator,
    num_users: usize,
    num_items: usize,
}

impl GraphContext {
    /// `graph` carries the training interactions plus any similarity links.
    pub fn new(graph: &InteractionGraph) -> Self {
        Self {
            adjacency: Arc::new(normalize_adjacency(&graph.enriched_adjacency())),
            condition: ConditionOperator::new(graph.num_users(), graph.num_items(), graph.edges()),
            num_users: graph.num_users(),
            num_items: graph.num_items(),
        }
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }
}

/// Tape handles produced by one training forward pass.
#[derive(Clone, Debug)]
pub struct ForwardPass {
    pub encoded: Var,
    pub noisy: Var,
    pub denoised: Var,
    pub t: usize,
    pub noise: DenseMatrix,
}

/// Where a training pass gets its forward noise.
pub enum NoiseInput<'a> {
    Sample(&'a mut RandomSource),
    Fixed(&'a DenseMatrix),
}

#[derive(Clone, Debug, PartialEq)]
pub struct InferenceOptions {
    pub seed: u64,
    /// Explicit reverse steps, largest first. Sampled from the schedule when absent.
    pub steps: Option<Vec<usize>>,
    pub attention: Option<AttentionKind>,
}

impl InferenceOptions {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            steps: None,
            attention: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffGt {
    config: ModelConfig,
    num_users: usize,
    num_items: usize,
    schedule: NoiseSchedule,
    params: ParamStore,
}

impl DiffGt {
    pub fn new(config: ModelConfig, num_users: usize, num_items: usize, rng: &mut RandomSource) -> Result<Self> {
        config.validate()?;
        let n = num_users + num_items;
        let mut params = ParamStore::new();
        params.insert("embedding", xavier_uniform(n, config.dim, rng));
        init_params(&mut params, &config, n, rng);
        Self::from_parts(config, num_users, num_items, params)
    }

    /// Rebuilds a model from stored parameters, checking every expected shape.
    pub fn from_parts(config: ModelConfig, num_users: usize, num_items: usize, params: ParamStore) -> Result<Self> {
        config.validate()?;
        let schedule = make_schedule(config.steps, config.beta_start, config.beta_end)?;
        let model = Self {
            config,
            num_users,
            num_items,
            schedule,
            params,
        };
        model.check_shapes()?;
        Ok(model)
    }

    fn check_shapes(&self) -> Result<()> {
        let (n, d) = (self.num_nodes(), self.config.dim);
        let mut expected = vec![
            ("embedding".to_string(), (n, d)),
            ("input.proj".to_string(), (2 * d, d)),
            ("step.proj".to_string(), (d, d)),
        ];
        match self.config.denoiser {
            DenoiserKind::Transformer => {
                for l in 0..self.config.denoiser_layers {
                    for part in ["query", "key", "value", "output"] {
                        expected.push((format!("layer{l}.{part}"), (d, d)));
                    }
                    if compresses(&self.config, n) {
                        expected.push((format!("layer{l}.compress"), (self.config.projected_len, n)));
                    }
                }
            }
            DenoiserKind::WeightedMatrix => expected.push(("weight".to_string(), (d, d))),
        }
        if expected.len() != self.params.len() {
            return Err(Error::Config(format!(
                "expected {} parameters, found {}",
                expected.len(),
                self.params.len()
            )));
        }
        for (name, shape) in expected {
            let value = self.params.by_name(&name).ok_or_else(|| Error::Config(format!("missing parameter {name}")))?;
            if value.shape() != shape {
                return Err(Error::shape("parameter", shape, value.shape()));
            }
        }
        Ok(())
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn schedule(&self) -> &NoiseSchedule {
        &self.schedule
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn into_params(self) -> ParamStore {
        self.params
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    pub fn num_nodes(&self) -> usize {
        self.num_users + self.num_items
    }

    pub fn embedding_id(&self) -> ParamId {
        self.params.find("embedding").expect("checked at construction")
    }

    fn check_context(&self, ctx: &GraphContext) -> Result<()> {
        if (ctx.num_users, ctx.num_items) != (self.num_users, self.num_items) {
            return Err(Error::shape(
                "graph context",
                (self.num_users, self.num_items),
                (ctx.num_users, ctx.num_items),
            ));
        }
        Ok(())
    }

    /// Encode, corrupt at step `t` and denoise, recording everything on `tape`.
    /// The noise is treated as a constant of the pass.
    pub fn forward(&self, tape: &mut GradientTape, ctx: &GraphContext, t: usize, noise: NoiseInput<'_>) -> Result<ForwardPass> {
        self.check_context(ctx)?;
        self.schedule.check_step(t)?;
        let id = self.embedding_id();
        let emb = tape.param(id, self.params.get(id));
        let encoded = encode_on_tape(tape, &ctx.adjacency, emb, self.config.encoder_layers)?;
        let x_g = tape.value(encoded).clone();
        let eps = match noise {
            NoiseInput::Sample(rng) => NoiseKind::new(self.config.noise, &x_g).sample(&x_g, rng)?,
            NoiseInput::Fixed(eps) => {
                if eps.shape() != x_g.shape() {
                    return Err(Error::shape("forward noise", x_g.shape(), eps.shape()));
                }
                eps.clone()
            }
        };
        let ab = self.schedule.alpha_bar(t);
        let kept = tape.scale(encoded, ab.sqrt());
        let added = tape.constant(eps.scale((1.0 - ab).sqrt()));
        let noisy = tape.add(kept, added)?;
        let cond = if self.config.condition {
            ctx.condition.apply_on_tape(tape, encoded)?
        } else {
            tape.constant(DenseMatrix::zeros(x_g.rows(), x_g.cols()))
        };
        let input = DenoiserInput { x_t: noisy, cond, t };
        let denoised = denoise(tape, &self.params, &self.config, input, self.config.attention)?;
        Ok(ForwardPass {
            encoded,
            noisy,
            denoised,
            t,
            noise: eps,
        })
    }

    pub fn encode(&self, ctx: &GraphContext) -> Result<DenseMatrix> {
        self.check_context(ctx)?;
        encode(&ctx.adjacency, self.params.get(self.embedding_id()), self.config.encoder_layers)
    }

    pub fn condition_rows(&self, ctx: &GraphContext, x_g: &DenseMatrix) -> DenseMatrix {
        if self.config.condition {
            ctx.condition.apply(x_g)
        } else {
            DenseMatrix::zeros(x_g.rows(), x_g.cols())
        }
    }

    /// Embeddings read by the ranking head.
    pub fn infer(&self, ctx: &GraphContext, opts: &InferenceOptions) -> Result<DenseMatrix> {
        let x_g = self.encode(ctx)?;
        if self.config.score_on == ScoreOn::Encoded {
            return Ok(x_g);
        }
        let mut rng = RandomSource::new(opts.seed);
        let steps = match &opts.steps {
            Some(s) => s.clone(),
            None => sample_reverse_steps(self.config.steps, self.config.reverse_samples, &mut rng)?,
        };
        let kind = NoiseKind::new(self.config.noise, &x_g);
        let start = *steps.first().ok_or_else(|| Error::Config("no reverse steps".into()))?;
        let noisy = forward_diffuse(&x_g, start, &self.schedule, &kind, &mut rng)?.x_t;
        let cond = self.condition_rows(ctx, &x_g);
        self.reverse(&noisy, &cond, &steps, opts.attention.unwrap_or(self.config.attention))
    }

    /// Walks `steps` (strictly decreasing) from x_t down to x̂₀.
    pub fn reverse(&self, x_t: &DenseMatrix, cond: &DenseMatrix, steps: &[usize], attention: AttentionKind) -> Result<DenseMatrix> {
        if steps.is_empty() || steps.windows(2).any(|w| w[0] <= w[1]) {
            return Err(Error::Config(format!("reverse steps must be strictly decreasing, got {steps:?}")));
        }
        let mut x = x_t.clone();
        for (j, &t) in steps.iter().enumerate() {
            let x0 = self.denoise_once(&x, cond, t, attention)?;
            let s = steps.get(j + 1).copied().unwrap_or(0);
            x = combine(&x, &x0, self.schedule.posterior_between(s, t)?)?.0;
        }
        Ok(x)
    }

    /// One denoiser call outside training.
    pub fn denoise_once(&self, x_t: &DenseMatrix, cond: &DenseMatrix, t: usize, attention: AttentionKind) -> Result<DenseMatrix> {
        let mut tape = GradientTape::new();
        let input = DenoiserInput {
            x_t: tape.constant(x_t.clone()),
            cond: tape.constant(cond.clone()),
            t,
        };
        let out = denoise(&mut tape, &self.params, &self.config, input, attention)?;
        Ok(tape.value(out).clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (InteractionGraph, ModelConfig) {
        let g = InteractionGraph::new(3, 4, vec![(0, 0), (0, 1), (1, 1), (1, 2), (2, 3), (2, 0)]).unwrap();
        let cfg = ModelConfig {
            dim: 4,
            projected_len: 3,
            steps: 10,
            reverse_samples: 3,
            ..ModelConfig::default()
        };
        (g, cfg)
    }

    #[test]
    fn fresh_model_denoises_to_noisy_input() {
        let (g, cfg) = toy();
        let model = DiffGt::new(cfg, 3, 4, &mut RandomSource::new(1)).unwrap();
        let ctx = GraphContext::new(&g);
        let mut tape = GradientTape::new();
        let pass = model.forward(&mut tape, &ctx, 4, NoiseInput::Sample(&mut RandomSource::new(2))).unwrap();
        assert_eq!(tape.value(pass.denoised), tape.value(pass.noisy));
        assert_eq!(tape.shape(pass.encoded), (7, 4));
    }

    #[test]
    fn inference_is_deterministic() {
        let (g, cfg) = toy();
        let model = DiffGt::new(cfg, 3, 4, &mut RandomSource::new(1)).unwrap();
        let ctx = GraphContext::new(&g);
        let a = model.infer(&ctx, &InferenceOptions::new(5)).unwrap();
        let b = model.infer(&ctx, &InferenceOptions::new(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_reverse_step_returns_prediction() {
        let (g, cfg) = toy();
        let model = DiffGt::new(cfg, 3, 4, &mut RandomSource::new(1)).unwrap();
        let ctx = GraphContext::new(&g);
        let x = RandomSource::new(3).standard_normal(7, 4);
        let c = model.condition_rows(&ctx, &x);
        let direct = model.denoise_once(&x, &c, 6, AttentionKind::Linear).unwrap();
        assert_eq!(model.reverse(&x, &c, &[6], AttentionKind::Linear).unwrap(), direct);
        assert!(model.reverse(&x, &c, &[2, 6], AttentionKind::Linear).is_err());
    }

    #[test]
    fn encoded_scoring_skips_diffusion() {
        let (g, cfg) = toy();
        let cfg = ModelConfig {
            score_on: ScoreOn::Encoded,
            ..cfg
        };
        let model = DiffGt::new(cfg, 3, 4, &mut RandomSource::new(1)).unwrap();
        let ctx = GraphContext::new(&g);
        assert_eq!(model.infer(&ctx, &InferenceOptions::new(0)).unwrap(), model.encode(&ctx).unwrap());
    }

    #[test]
    fn parts_round_trip_and_shape_check() {
        let (_, cfg) = toy();
        let model = DiffGt::new(cfg.clone(), 3, 4, &mut RandomSource::new(1)).unwrap();
        let params = model.params().clone();
        let back = DiffGt::from_parts(cfg.clone(), 3, 4, params.clone()).unwrap();
        assert_eq!(back, model);
        assert!(DiffGt::from_parts(cfg, 4, 4, params).is_err());
    }

    #[test]
    fn context_must_match() {
        let (_, cfg) = toy();
        let model = DiffGt::new(cfg, 3, 4, &mut RandomSource::new(1)).unwrap();
        let other = GraphContext::new(&InteractionGraph::new(2, 4, vec![(0, 0)]).unwrap());
        assert!(model.encode(&other).is_err());
    }
}
