use super::params::xavier_uniform;
use super::{AttentionKind, DenoiserKind, ModelConfig, ParamStore};
use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, GradientTape, RandomSource, Trans, Var};

/// Tokens entering the denoiser: noisy rows and matching condition rows.
#[derive(Clone, Copy, Debug)]
pub struct DenoiserInput {
    pub x_t: Var,
    pub cond: Var,
    pub t: usize,
}

/// Sinusoidal embedding of step `t` as a 1×d row.
pub fn step_embedding(t: usize, dim: usize) -> DenseMatrix {
    let mut row = vec![0.0; dim];
    for (c, v) in row.iter_mut().enumerate() {
        let pair = (c / 2) as f64;
        let freq = 1.0 / 10_000f64.powf(2.0 * pair / dim as f64);
        let angle = t as f64 * freq;
        *v = if c % 2 == 0 { angle.sin() } else { angle.cos() };
    }
    DenseMatrix::row_vector(&row)
}

/// Registers denoiser parameters for `tokens` rows. Projections that feed
/// the residual stream start at zero, so a fresh denoiser returns x_t.
pub(crate) fn init_params(store: &mut ParamStore, cfg: &ModelConfig, tokens: usize, rng: &mut RandomSource) {
    let d = cfg.dim;
    store.insert("input.proj", DenseMatrix::zeros(2 * d, d));
    store.insert("step.proj", DenseMatrix::zeros(d, d));
    match cfg.denoiser {
        DenoiserKind::Transformer => {
            for l in 0..cfg.denoiser_layers {
                store.insert(format!("layer{l}.query"), xavier_uniform(d, d, rng));
                store.insert(format!("layer{l}.key"), xavier_uniform(d, d, rng));
                store.insert(format!("layer{l}.value"), xavier_uniform(d, d, rng));
                store.insert(format!("layer{l}.output"), DenseMatrix::zeros(d, d));
                if compresses(cfg, tokens) {
                    store.insert(format!("layer{l}.compress"), xavier_uniform(cfg.projected_len, tokens, rng));
                }
            }
        }
        DenoiserKind::WeightedMatrix => {
            store.insert("weight", DenseMatrix::identity(d));
        }
    }
}

/// Keys and values are compressed only when the projected length is below
/// the token count; otherwise linear attention is full attention.
pub(crate) fn compresses(cfg: &ModelConfig, tokens: usize) -> bool {
    cfg.projected_len < tokens
}

/// x̂₀ for every token, each row on the norm of its x_t row.
pub fn denoise(
    tape: &mut GradientTape,
    params: &ParamStore,
    cfg: &ModelConfig,
    input: DenoiserInput,
    attention: AttentionKind,
) -> Result<Var> {
    let (n, d) = tape.shape(input.x_t);
    if d != cfg.dim {
        return Err(Error::shape("denoise", (n, d), (n, cfg.dim)));
    }
    if tape.shape(input.cond) != (n, d) {
        return Err(Error::shape("denoise condition", (n, d), tape.shape(input.cond)));
    }
    if input.t == 0 || input.t > cfg.steps {
        return Err(Error::Step {
            step: input.t,
            max: cfg.steps,
        });
    }
    let mut h = embed_tokens(tape, params, cfg, input)?;
    match cfg.denoiser {
        DenoiserKind::Transformer => {
            for l in 0..cfg.denoiser_layers {
                h = attention_layer(tape, params, cfg, h, l, attention)?.0;
            }
        }
        DenoiserKind::WeightedMatrix => {
            let w = bind(tape, params, "weight")?;
            h = tape.matmul(h, w)?;
        }
    }
    // Each output row keeps the norm of its input row, so chaining reverse
    // steps cannot inflate the embedding scale.
    tape.match_row_norms(h, input.x_t)
}

/// Softmax weights of layer `layer` applied to hidden rows `h`.
pub fn attention_weights(
    params: &ParamStore,
    cfg: &ModelConfig,
    h: &DenseMatrix,
    layer: usize,
    attention: AttentionKind,
) -> Result<DenseMatrix> {
    let mut tape = GradientTape::new();
    let hv = tape.constant(h.clone());
    let (_, weights) = attention_layer(&mut tape, params, cfg, hv, layer, attention)?;
    Ok(tape.value(weights).clone())
}

fn embed_tokens(tape: &mut GradientTape, params: &ParamStore, cfg: &ModelConfig, input: DenoiserInput) -> Result<Var> {
    let tokens = tape.concat_cols(input.x_t, input.cond)?;
    let w_in = bind(tape, params, "input.proj")?;
    let projected = tape.matmul(tokens, w_in)?;
    let h = tape.add(input.x_t, projected)?;
    let s = tape.constant(step_embedding(input.t, cfg.dim));
    let w_s = bind(tape, params, "step.proj")?;
    let step = tape.matmul(s, w_s)?;
    tape.add_row(h, step)
}

fn attention_layer(
    tape: &mut GradientTape,
    params: &ParamStore,
    cfg: &ModelConfig,
    h: Var,
    l: usize,
    attention: AttentionKind,
) -> Result<(Var, Var)> {
    let wq = bind(tape, params, &format!("layer{l}.query"))?;
    let wk = bind(tape, params, &format!("layer{l}.key"))?;
    let wv = bind(tape, params, &format!("layer{l}.value"))?;
    let wo = bind(tape, params, &format!("layer{l}.output"))?;
    let q = tape.matmul(h, wq)?;
    let source = match attention {
        // Each compressed row is a convex combination of token rows, so
        // keys and values stay on the scale of the tokens.
        AttentionKind::Linear => match params.find(&format!("layer{l}.compress")) {
            Some(id) => {
                let logits = tape.param(id, params.get(id));
                let e = tape.softmax_rows(logits);
                tape.matmul(e, h)?
            }
            None => h,
        },
        AttentionKind::Full => h,
    };
    let k = tape.matmul(source, wk)?;
    let v = tape.matmul(source, wv)?;
    let logits = tape.matmul_t(q, Trans::No, k, Trans::Yes)?;
    let logits = tape.scale(logits, 1.0 / (cfg.dim as f64).sqrt());
    let weights = tape.softmax_rows(logits);
    let mixed = tape.matmul(weights, v)?;
    let out = tape.matmul(mixed, wo)?;
    Ok((tape.add(h, out)?, weights))
}

fn bind(tape: &mut GradientTape, params: &ParamStore, name: &str) -> Result<Var> {
    let id = params.id(name)?;
    Ok(tape.param(id, params.get(id)))
}
