use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::diffusion::{discrete_forward, forward_diffuse, sample_reverse_steps, BinaryMatrix, NoiseKind};
use crate::error::{Error, Result};
use crate::graph::{normalize_adjacency, DataSplit, InteractionGraph};
use crate::model::{encode, AttentionKind, DiffGt, GraphContext, InferenceOptions, ModelConfig};
use crate::numerics::{DenseMatrix, RandomSource};

use super::metrics::{evaluate_embeddings, MetricReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimingVariant {
    /// Edge-flip chain on the adjacency, full attention over every step.
    Discrete,
    /// Gaussian diffusion of encoded embeddings, full attention over every step.
    Continuous,
    ContinuousLinear,
    /// Full attention over K sampled steps.
    ContinuousSampling,
    /// Linear attention over K sampled steps.
    Combined,
}

impl TimingVariant {
    pub const ALL: [TimingVariant; 5] = [
        TimingVariant::Discrete,
        TimingVariant::Continuous,
        TimingVariant::ContinuousLinear,
        TimingVariant::ContinuousSampling,
        TimingVariant::Combined,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TimingVariant::Discrete => "discrete",
            TimingVariant::Continuous => "continuous",
            TimingVariant::ContinuousLinear => "continuous-linear",
            TimingVariant::ContinuousSampling => "continuous-sampling",
            TimingVariant::Combined => "combined",
        }
    }

    pub fn attention(self) -> AttentionKind {
        match self {
            TimingVariant::ContinuousLinear | TimingVariant::Combined => AttentionKind::Linear,
            _ => AttentionKind::Full,
        }
    }

    pub fn sampled(self) -> bool {
        matches!(self, TimingVariant::ContinuousSampling | TimingVariant::Combined)
    }
}

impl fmt::Display for TimingVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingSetup {
    /// Users plus items of the synthetic graph.
    pub nodes: usize,
    /// Interactions per synthetic user.
    pub degree: usize,
    pub model: ModelConfig,
    pub seed: u64,
    /// Each time is the minimum over this many runs.
    pub repeats: usize,
}

impl TimingSetup {
    pub fn new(nodes: usize, steps: usize, samples: usize) -> Self {
        Self {
            nodes,
            degree: 10,
            model: ModelConfig {
                steps,
                reverse_samples: samples,
                ..ModelConfig::default()
            },
            seed: 7,
            repeats: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub variant: TimingVariant,
    pub nodes: usize,
    pub edges: usize,
    pub steps: usize,
    pub reverse_steps: usize,
    pub dim: usize,
    pub forward_secs: f64,
    pub reverse_secs: f64,
    pub recall: Option<f64>,
    pub ndcg: Option<f64>,
}

/// Bipartite graph with `nodes / 2` users, each linked to `degree` distinct
/// random items.
pub fn synthetic_graph(nodes: usize, degree: usize, seed: u64) -> Result<InteractionGraph> {
    let num_users = nodes / 2;
    let num_items = nodes - num_users;
    if num_users == 0 || degree == 0 || degree > num_items {
        return Err(Error::Config(format!("cannot build a graph of {nodes} nodes with degree {degree}")));
    }
    let mut rng = RandomSource::new(seed);
    let mut edges = Vec::with_capacity(num_users * degree);
    let mut pool: Vec<usize> = (0..num_items).collect();
    for u in 0..num_users {
        // partial Fisher–Yates: the first `degree` slots are a uniform sample
        for j in 0..degree {
            let pick = j + rng.below(num_items - j);
            pool.swap(j, pick);
            edges.push((u, pool[j]));
        }
    }
    InteractionGraph::new(num_users, num_items, edges)
}

fn min_time(repeats: usize, mut f: impl FnMut() -> Result<()>) -> Result<f64> {
    let mut best = f64::INFINITY;
    for _ in 0..repeats.max(1) {
        let start = Instant::now();
        f()?;
        best = best.min(start.elapsed().as_secs_f64());
    }
    Ok(best)
}

struct Fixture {
    graph: InteractionGraph,
    ctx: GraphContext,
    model: DiffGt,
    x_g: DenseMatrix,
    cond: DenseMatrix,
}

impl Fixture {
    fn new(setup: &TimingSetup) -> Result<Self> {
        let graph = synthetic_graph(setup.nodes, setup.degree, setup.seed)?;
        let ctx = GraphContext::new(&graph);
        let mut rng = RandomSource::new(setup.seed).derive(1);
        let model = DiffGt::new(setup.model.clone(), graph.num_users(), graph.num_items(), &mut rng)?;
        let x_g = model.encode(&ctx)?;
        let cond = model.condition_rows(&ctx, &x_g);
        Ok(Self {
            graph,
            ctx,
            model,
            x_g,
            cond,
        })
    }

    fn reverse_steps(&self, variant: TimingVariant, seed: u64) -> Result<Vec<usize>> {
        let cfg = self.model.config();
        if variant.sampled() {
            sample_reverse_steps(cfg.steps, cfg.reverse_samples, &mut RandomSource::new(seed))
        } else {
            Ok((1..=cfg.steps).rev().collect())
        }
    }

    /// T forward steps, each followed by the encoder.
    fn forward(&self, variant: TimingVariant, seed: u64) -> Result<()> {
        let sched = self.model.schedule();
        let layers = self.model.config().encoder_layers;
        let emb = self.model.params().get(self.model.embedding_id());
        let mut rng = RandomSource::new(seed);
        if variant == TimingVariant::Discrete {
            let mut bits = BinaryMatrix::from_graph(&self.graph);
            for t in 1..=sched.steps() {
                bits = discrete_forward(&bits, 1, &[sched.beta(t)], &mut rng)?;
                let adj = normalize_adjacency(&bits.to_csr());
                std::hint::black_box(encode(&adj, emb, layers)?);
            }
        } else {
            let kind = NoiseKind::new(self.model.config().noise, &self.x_g);
            for t in 1..=sched.steps() {
                let x_g = encode(&self.ctx.adjacency, emb, layers)?;
                std::hint::black_box(forward_diffuse(&x_g, t, sched, &kind, &mut rng)?);
            }
        }
        Ok(())
    }

    fn reverse(&self, variant: TimingVariant, steps: &[usize]) -> Result<()> {
        std::hint::black_box(self.model.reverse(&self.x_g, &self.cond, steps, variant.attention())?);
        Ok(())
    }
}

/// Wall-clock forward and reverse times of each variant on one synthetic
/// graph, model and seed.
pub fn timing_harness(setup: &TimingSetup, variants: &[TimingVariant]) -> Result<Vec<TimingReport>> {
    setup.model.validate()?;
    let fx = Fixture::new(setup)?;
    let mut out = Vec::with_capacity(variants.len());
    for &variant in variants {
        let steps = fx.reverse_steps(variant, setup.seed)?;
        let forward_secs = min_time(setup.repeats, || fx.forward(variant, setup.seed))?;
        let reverse_secs = min_time(setup.repeats, || fx.reverse(variant, &steps))?;
        log::info!("{variant}: forward {forward_secs:.4}s reverse {reverse_secs:.4}s");
        out.push(TimingReport {
            variant,
            nodes: setup.nodes,
            edges: fx.graph.edges().len(),
            steps: setup.model.steps,
            reverse_steps: steps.len(),
            dim: setup.model.dim,
            forward_secs,
            reverse_secs,
            recall: None,
            ndcg: None,
        });
    }
    Ok(out)
}

/// Ranking quality of a trained model when inference uses the variant's
/// attention and step schedule. The discrete variant has no continuous
/// counterpart to score and yields `None`.
pub fn variant_quality(
    model: &DiffGt,
    ctx: &GraphContext,
    split: &DataSplit,
    variant: TimingVariant,
    seed: u64,
    k: usize,
) -> Result<Option<MetricReport>> {
    if variant == TimingVariant::Discrete {
        return Ok(None);
    }
    let cfg = model.config();
    let steps = if variant.sampled() {
        sample_reverse_steps(cfg.steps, cfg.reverse_samples, &mut RandomSource::new(seed).derive(1))?
    } else {
        (1..=cfg.steps).rev().collect()
    };
    let opts = InferenceOptions {
        steps: Some(steps),
        attention: Some(variant.attention()),
        ..InferenceOptions::new(seed)
    };
    let x = model.infer(ctx, &opts)?;
    Ok(Some(evaluate_embeddings(&x, model.num_users(), split, k)))
}

pub fn timing_csv(reports: &[TimingReport]) -> String {
    let mut out = String::from("variant,nodes,edges,steps,reverse_steps,dim,forward_secs,reverse_secs,recall,ndcg\n");
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.variant,
            r.nodes,
            r.edges,
            r.steps,
            r.reverse_steps,
            r.dim,
            r.forward_secs,
            r.reverse_secs,
            opt(r.recall),
            opt(r.ndcg)
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> TimingSetup {
        let mut s = TimingSetup::new(40, 6, 2);
        s.degree = 4;
        s.model.dim = 8;
        s.model.projected_len = 8;
        s.repeats = 1;
        s
    }

    #[test]
    fn synthetic_graph_degrees() {
        let g = synthetic_graph(100, 7, 3).unwrap();
        assert_eq!((g.num_users(), g.num_items()), (50, 50));
        assert!(g.user_items().iter().all(|items| items.len() == 7));
        assert!(synthetic_graph(10, 6, 3).is_err());
    }

    #[test]
    fn reports_every_variant() {
        let reports = timing_harness(&tiny(), &TimingVariant::ALL).unwrap();
        assert_eq!(reports.len(), 5);
        for r in &reports {
            assert!(r.forward_secs >= 0.0 && r.reverse_secs >= 0.0);
            assert_eq!(r.reverse_steps, if r.variant.sampled() { 2 } else { 6 });
        }
        let csv = timing_csv(&reports);
        assert_eq!(csv.lines().count(), 6);
        assert!(csv.contains("\ncontinuous-sampling,40,"));
    }

    #[test]
    fn quality_skips_discrete() {
        let fx = Fixture::new(&tiny()).unwrap();
        let split = crate::graph::split(&fx.graph, 1);
        let none = variant_quality(&fx.model, &fx.ctx, &split, TimingVariant::Discrete, 1, 5).unwrap();
        assert!(none.is_none());
        let some = variant_quality(&fx.model, &fx.ctx, &split, TimingVariant::Combined, 1, 5).unwrap();
        assert!(some.is_some());
    }
}
