use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::losses::{bpr_loss, bpr_on_tape, contrastive_on_tape, diffusion_on_tape, total_loss, LossParts};
use super::{Adam, EarlyStopping, TrainConfig};
use crate::error::{Error, Result};
use crate::graph::{enrich_with_side_info, DataSplit, Edge, InteractionGraph, SideFeatures};
use crate::model::{DiffGt, ForwardPass, GraphContext, NoiseInput, ScoreOn};
use crate::numerics::{DenseMatrix, GradientTape, RandomSource, Var};

/// One row of the training log.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub epoch: usize,
    pub bpr: f64,
    pub diff: f64,
    pub cl: f64,
    pub total: f64,
    pub val_loss: f64,
}

pub const LOG_HEADER: &str = "epoch,bpr,diff,cl,total,val_loss";

pub fn log_csv(rows: &[LogRow]) -> String {
    let mut out = String::from(LOG_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{},{}", r.epoch, r.bpr, r.diff, r.cl, r.total, r.val_loss);
    }
    out
}

/// Sampled `(user, positive, negative)` triples and the diffusion step for
/// one optimisation step. Items are local indices.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub users: Vec<usize>,
    pub positives: Vec<usize>,
    pub negatives: Vec<usize>,
    pub t: usize,
}

/// Loss handles of one batch; disabled terms are `None`.
#[derive(Clone, Debug)]
pub struct Objective {
    pub total: Var,
    pub bpr: Var,
    pub diffusion: Option<Var>,
    pub contrastive: Option<Var>,
    pub pass: ForwardPass,
}

/// Records the weighted training objective of `batch` on `tape`.
pub fn objective(
    tape: &mut GradientTape,
    model: &DiffGt,
    ctx: &GraphContext,
    batch: &Batch,
    cfg: &TrainConfig,
    noise: NoiseInput<'_>,
) -> Result<Objective> {
    let nu = model.num_users();
    let pass = model.forward(tape, ctx, batch.t, noise)?;
    let ranked = match model.config().score_on {
        ScoreOn::Denoised => pass.denoised,
        ScoreOn::Encoded => pass.encoded,
    };
    let users = tape.gather_rows(ranked, &batch.users)?;
    let pos_nodes: Vec<usize> = batch.positives.iter().map(|i| nu + i).collect();
    let neg_nodes: Vec<usize> = batch.negatives.iter().map(|i| nu + i).collect();
    let pos = tape.gather_rows(ranked, &pos_nodes)?;
    let neg = tape.gather_rows(ranked, &neg_nodes)?;
    let s_pos = tape.row_dot(users, pos)?;
    let s_neg = tape.row_dot(users, neg)?;
    let bpr = bpr_on_tape(tape, s_pos, s_neg)?;
    let mut total = bpr;

    let w = &cfg.weights;
    let diffusion = if w.diffusion != 0.0 {
        let d = diffusion_on_tape(tape, pass.encoded, pass.denoised)?;
        let weighted = tape.scale(d, w.diffusion);
        total = tape.add(total, weighted)?;
        Some(d)
    } else {
        None
    };

    let contrastive = if w.contrastive != 0.0 {
        let user_nodes = first_unique(&batch.users, cfg.contrastive_sample);
        let item_nodes: Vec<usize> = first_unique(&batch.positives, cfg.contrastive_sample)
            .into_iter()
            .map(|i| nu + i)
            .collect();
        let n = (user_nodes.len() + item_nodes.len()) as f64;
        let mut parts = Vec::new();
        for nodes in [&user_nodes, &item_nodes] {
            let a = tape.gather_rows(pass.encoded, nodes)?;
            let p = tape.gather_rows(pass.denoised, nodes)?;
            let l = contrastive_on_tape(tape, a, p, w.temperature)?;
            parts.push(tape.scale(l, nodes.len() as f64 / n));
        }
        let c = tape.add(parts[0], parts[1])?;
        let weighted = tape.scale(c, w.contrastive);
        total = tape.add(total, weighted)?;
        Some(c)
    } else {
        None
    };

    Ok(Objective {
        total,
        bpr,
        diffusion,
        contrastive,
        pass,
    })
}

fn first_unique(values: &[usize], limit: usize) -> Vec<usize> {
    let mut seen = std::collections::HashSet::new();
    values
        .iter()
        .copied()
        .filter(|v| seen.insert(*v))
        .take(limit)
        .collect()
}

/// A uniformly drawn item outside `known` (sorted). Falls back to any item
/// when the user has interacted with nearly the whole catalogue.
pub fn sample_negative(rng: &mut RandomSource, num_items: usize, known: &[usize]) -> usize {
    let mut j = rng.below(num_items);
    for _ in 0..64 {
        if known.binary_search(&j).is_err() {
            break;
        }
        j = rng.below(num_items);
    }
    j
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters at the epoch with the lowest validation loss.
    pub model: DiffGt,
    pub log: Vec<LogRow>,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

pub struct Trainer {
    cfg: TrainConfig,
    ctx: GraphContext,
    model: DiffGt,
    best: DiffGt,
    last_finite: DiffGt,
    adam: Adam,
    stopper: EarlyStopping,
    rng: RandomSource,
    train: Vec<Edge>,
    train_items: Vec<Vec<usize>>,
    validation: Vec<(usize, usize, usize)>,
    log: Vec<LogRow>,
    epoch: usize,
}

impl Trainer {
    pub fn new(graph: &InteractionGraph, side: &SideFeatures, split: &DataSplit, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        if split.train.is_empty() {
            return Err(Error::Degenerate("training split has no edges".into()));
        }
        let train_graph = training_graph(graph, side, split, &cfg)?;
        let ctx = GraphContext::new(&train_graph);
        let root = RandomSource::new(cfg.seed);
        let model = DiffGt::new(cfg.model.clone(), graph.num_users(), graph.num_items(), &mut root.derive(1))?;

        let train_items = train_graph.user_items();
        let mut seen = train_items.clone();
        for &(u, i) in &split.validation {
            seen[u].push(i);
        }
        seen.iter_mut().for_each(|v| v.sort_unstable());
        let mut neg_rng = root.derive(3);
        let validation = split
            .validation
            .iter()
            .map(|&(u, i)| (u, i, sample_negative(&mut neg_rng, graph.num_items(), &seen[u])))
            .collect();

        Ok(Self {
            adam: Adam::new(cfg.learning_rate, model.params()),
            stopper: EarlyStopping::new(cfg.patience),
            rng: root.derive(2),
            train: split.train.clone(),
            best: model.clone(),
            last_finite: model.clone(),
            model,
            ctx,
            train_items,
            validation,
            log: Vec::new(),
            epoch: 0,
            cfg,
        })
    }

    pub fn model(&self) -> &DiffGt {
        &self.model
    }

    pub fn context(&self) -> &GraphContext {
        &self.ctx
    }

    /// Parameters at the start of the most recent epoch, finite by construction.
    pub fn last_finite(&self) -> &DiffGt {
        &self.last_finite
    }

    pub fn log(&self) -> &[LogRow] {
        &self.log
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    /// BPR loss of the fixed validation triples under deterministic inference.
    /// `None` when there are no validation edges.
    pub fn validation_loss(&self, model: &DiffGt) -> Result<Option<f64>> {
        if self.validation.is_empty() {
            return Ok(None);
        }
        let x = model.infer(&self.ctx, &self.cfg.inference())?;
        let nu = model.num_users();
        let dot = |a: usize, b: usize| -> f64 { x.row(a).iter().zip(x.row(b)).map(|(p, q)| p * q).sum() };
        let pos: Vec<f64> = self.validation.iter().map(|&(u, i, _)| dot(u, nu + i)).collect();
        let neg: Vec<f64> = self.validation.iter().map(|&(u, _, j)| dot(u, nu + j)).collect();
        bpr_loss(&pos, &neg).map(Some)
    }

    /// Runs one pass over the shuffled training edges.
    pub fn run_epoch(&mut self) -> Result<LogRow> {
        self.epoch += 1;
        self.last_finite = self.model.clone();
        let epoch = self.epoch;
        let mut order = self.train.clone();
        self.rng.shuffle(&mut order);
        let steps = self.model.schedule().steps();
        let num_items = self.model.num_items();
        let mut sums = LossParts::default();
        let mut total_sum = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(self.cfg.batch_size) {
            let batch = Batch {
                users: chunk.iter().map(|e| e.0).collect(),
                positives: chunk.iter().map(|e| e.1).collect(),
                negatives: chunk
                    .iter()
                    .map(|&(u, _)| sample_negative(&mut self.rng, num_items, &self.train_items[u]))
                    .collect(),
                t: 1 + self.rng.below(steps),
            };
            let mut tape = GradientTape::new();
            let obj = objective(&mut tape, &self.model, &self.ctx, &batch, &self.cfg, NoiseInput::Sample(&mut self.rng))
                .map_err(|e| diverged(e, epoch))?;
            let parts = LossParts {
                bpr: tape.value(obj.bpr).as_scalar(),
                diffusion: obj.diffusion.map_or(0.0, |v| tape.value(v).as_scalar()),
                contrastive: obj.contrastive.map_or(0.0, |v| tape.value(v).as_scalar()),
            };
            for (term, value) in [("bpr", parts.bpr), ("diff", parts.diffusion), ("cl", parts.contrastive)] {
                if !value.is_finite() {
                    return Err(Error::Divergence { epoch, term });
                }
            }
            let grads = tape.gradient_of(obj.total)?;
            if !grads.is_finite() {
                return Err(Error::Divergence { epoch, term: "gradient" });
            }
            self.adam.step(self.model.params_mut(), &grads);
            if !self.model.params().is_finite() {
                return Err(Error::Divergence { epoch, term: "parameters" });
            }
            sums.bpr += parts.bpr;
            sums.diffusion += parts.diffusion;
            sums.contrastive += parts.contrastive;
            total_sum += tape.value(obj.total).as_scalar();
            batches += 1;
        }
        let n = batches as f64;
        let means = LossParts {
            bpr: sums.bpr / n,
            diffusion: sums.diffusion / n,
            contrastive: sums.contrastive / n,
        };
        debug_assert!((total_loss(means, &self.cfg.weights) - total_sum / n).abs() < 1e-9 * (1.0 + total_sum.abs()));
        let val_loss = match self.validation_loss(&self.model).map_err(|e| diverged(e, epoch))? {
            Some(v) if !v.is_finite() => return Err(Error::Divergence { epoch, term: "validation" }),
            Some(v) => v,
            None => f64::NAN,
        };
        if self.stopper.observe(epoch, val_loss) {
            self.best = self.model.clone();
        }
        let row = LogRow {
            epoch,
            bpr: means.bpr,
            diff: means.diffusion,
            cl: means.contrastive,
            total: total_sum / n,
            val_loss,
        };
        self.log.push(row);
        Ok(row)
    }

    pub fn should_stop(&self) -> bool {
        !self.validation.is_empty() && self.stopper.should_stop(self.epoch)
    }

    /// True once the epoch budget is spent.
    pub fn exhausted(&self) -> bool {
        self.epoch >= self.cfg.max_epochs
    }

    pub fn run(mut self) -> Result<TrainOutcome> {
        while !self.exhausted() {
            let row = self.run_epoch()?;
            log::debug!(
                "epoch {} total {:.5} bpr {:.5} diff {:.5} cl {:.5} val {:.5}",
                row.epoch,
                row.total,
                row.bpr,
                row.diff,
                row.cl,
                row.val_loss
            );
            if self.should_stop() {
                break;
            }
        }
        Ok(self.finish())
    }

    /// Best parameters seen so far; the latest ones when there is no
    /// validation data.
    pub fn finish(self) -> TrainOutcome {
        let stopped_early = self.should_stop();
        let (model, best_epoch) = if self.validation.is_empty() {
            (self.model, self.epoch)
        } else {
            (self.best, self.stopper.best_epoch())
        };
        TrainOutcome {
            model,
            log: self.log,
            best_epoch,
            stopped_early,
        }
    }
}

fn diverged(e: Error, epoch: usize) -> Error {
    match e {
        Error::NonFinite(term) => Error::Divergence { epoch, term },
        other => other,
    }
}

/// Ranking embeddings of `model` under the inference settings of `cfg`.
pub fn final_embeddings(model: &DiffGt, ctx: &GraphContext, cfg: &TrainConfig) -> Result<DenseMatrix> {
    model.infer(ctx, &cfg.inference())
}

/// Training graph (with similarity links when enabled) for `cfg`.
pub fn training_graph(graph: &InteractionGraph, side: &SideFeatures, split: &DataSplit, cfg: &TrainConfig) -> Result<InteractionGraph> {
    let g = graph.with_edges(split.train.clone())?;
    Ok(if cfg.side_info {
        enrich_with_side_info(&g, side, cfg.side_top_n)
    } else {
        g
    })
}
