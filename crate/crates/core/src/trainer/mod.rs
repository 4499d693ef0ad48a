//! Loss, Adam, the training loop, UAR metrics and experiment records.

mod adam;
mod check;
mod checkpoint;
mod config;
mod metrics;
mod run;

pub use adam::{adam_step, AdamState};
pub use check::{fuser_grad_check, random_input};
pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointConfig};
pub use config::TrainConfig;
pub use metrics::{Metrics, TaskMetrics};
pub use run::{
    bce_loss, evaluate, id_hash, logits, sample_loss_and_grads, train, write_history, EpochRecord,
    TrainOutcome, EVAL_SEED,
};
