//! Ranking metrics, separability and spectrum diagnostics, ablation and
//! timing harnesses.

mod ablation;
mod metrics;
mod snr;
pub mod svg;
mod svd_export;
mod timing;

pub use ablation::{ablate, ablate_many, train_and_evaluate, AblationReport, AblationRun};
pub use metrics::{evaluate_embeddings, evaluate_scores, mean_std, ndcg_at_k, recall_at_k, MetricReport};
pub use snr::{fisher_ratio, snr_csv, snr_curve, FisherRatio, SnrCurve, SCATTER_RIDGE};
pub use svd_export::{svd_export, SvdExport};
pub use timing::{
    synthetic_graph, timing_csv, timing_harness, variant_quality, TimingReport, TimingSetup, TimingVariant,
};

/// Default ranking cutoff.
pub const DEFAULT_K: usize = 20;
