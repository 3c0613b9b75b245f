//! Objective, optimiser and the epoch loop.

mod checkpoint;
mod config;
mod early_stop;
mod losses;
mod optim;
mod trainer;

pub use checkpoint::{config_hash, dataset_hash, Checkpoint, CHECKPOINT_VERSION};
pub use config::{LossWeights, TrainConfig, Variant};
pub use early_stop::EarlyStopping;
pub use losses::{
    bpr_loss, bpr_on_tape, contrastive_loss, contrastive_on_tape, diffusion_loss, diffusion_on_tape, total_loss,
    LossParts,
};
pub use optim::Adam;
pub use trainer::{
    final_embeddings, log_csv, objective, sample_negative, training_graph, Batch, LogRow, Objective, TrainOutcome,
    Trainer, LOG_HEADER,
};
