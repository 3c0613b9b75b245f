use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::graph::{DataSplit, InteractionGraph, SideFeatures};
use crate::model::GraphContext;
use crate::training::{final_embeddings, training_graph, TrainConfig, TrainOutcome, Trainer, Variant};

use super::metrics::{evaluate_embeddings, mean_std, MetricReport};

/// Trains `cfg` on the split and scores the best epoch on every test draw.
pub fn train_and_evaluate(
    graph: &InteractionGraph,
    side: &SideFeatures,
    split: &DataSplit,
    cfg: &TrainConfig,
    k: usize,
) -> Result<(TrainOutcome, MetricReport)> {
    let outcome = Trainer::new(graph, side, split, cfg.clone())?.run()?;
    let ctx = GraphContext::new(&training_graph(graph, side, split, cfg)?);
    let x = final_embeddings(&outcome.model, &ctx, cfg)?;
    let report = evaluate_embeddings(&x, graph.num_users(), split, k);
    Ok((outcome, report))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRun {
    pub seed: u64,
    pub base: MetricReport,
    pub variant: MetricReport,
}

impl AblationRun {
    /// Base minus variant recall.
    pub fn recall_diff(&self) -> f64 {
        self.base.recall_mean - self.variant.recall_mean
    }

    pub fn ndcg_diff(&self) -> f64 {
        self.base.ndcg_mean - self.variant.ndcg_mean
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub variant: Variant,
    pub runs: Vec<AblationRun>,
}

impl AblationReport {
    pub fn base_recall(&self) -> (f64, f64) {
        mean_std(&self.runs.iter().map(|r| r.base.recall_mean).collect::<Vec<_>>())
    }

    pub fn variant_recall(&self) -> (f64, f64) {
        mean_std(&self.runs.iter().map(|r| r.variant.recall_mean).collect::<Vec<_>>())
    }

    pub fn base_ndcg(&self) -> (f64, f64) {
        mean_std(&self.runs.iter().map(|r| r.base.ndcg_mean).collect::<Vec<_>>())
    }

    pub fn variant_ndcg(&self) -> (f64, f64) {
        mean_std(&self.runs.iter().map(|r| r.variant.ndcg_mean).collect::<Vec<_>>())
    }

    /// Seeds on which the base model beats the variant in recall.
    pub fn base_wins(&self) -> usize {
        self.runs.iter().filter(|r| r.recall_diff() > 0.0).count()
    }

    pub fn to_csv(&self) -> String {
        let k = self.runs.first().map_or(20, |r| r.base.k);
        let mut out = format!(
            "variant,seed,base_recall@{k},variant_recall@{k},recall_diff,base_ndcg@{k},variant_ndcg@{k},ndcg_diff\n"
        );
        for r in &self.runs {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                self.variant,
                r.seed,
                r.base.recall_mean,
                r.variant.recall_mean,
                r.recall_diff(),
                r.base.ndcg_mean,
                r.variant.ndcg_mean,
                r.ndcg_diff()
            ));
        }
        out
    }
}

/// Paired runs of `base` and each variant, one pair per seed; the base model
/// is trained once per seed and shared by all variants.
pub fn ablate_many(
    graph: &InteractionGraph,
    side: &SideFeatures,
    split: &DataSplit,
    base: &TrainConfig,
    variants: &[Variant],
    seeds: &[u64],
    k: usize,
) -> Result<Vec<AblationReport>> {
    let mut reports: Vec<AblationReport> = variants
        .iter()
        .map(|&variant| AblationReport {
            variant,
            runs: Vec::new(),
        })
        .collect();
    for &seed in seeds {
        let seeded = TrainConfig { seed, ..base.clone() };
        let (_, base_report) = train_and_evaluate(graph, side, split, &seeded, k)?;
        log::info!("seed {seed}: full recall@{k} {:.4}", base_report.recall_mean);
        for report in &mut reports {
            let cfg = report.variant.apply(&seeded);
            let (_, variant_report) = train_and_evaluate(graph, side, split, &cfg, k)?;
            log::info!("seed {seed}: {} recall@{k} {:.4}", report.variant, variant_report.recall_mean);
            report.runs.push(AblationRun {
                seed,
                base: base_report.clone(),
                variant: variant_report,
            });
        }
    }
    Ok(reports)
}

pub fn ablate(
    graph: &InteractionGraph,
    side: &SideFeatures,
    split: &DataSplit,
    base: &TrainConfig,
    variant: Variant,
    seeds: &[u64],
    k: usize,
) -> Result<AblationReport> {
    let mut reports = ablate_many(graph, side, split, base, &[variant], seeds, k)?;
    Ok(reports.remove(0))
}
