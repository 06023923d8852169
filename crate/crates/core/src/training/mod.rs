//! Loss, optimizer, clipping and the epoch loop.

mod adam;
mod clip;
mod loss;
mod trainer;

pub use adam::{adam_step, AdamState};
pub use clip::{clip_gradients, global_norm};
pub use loss::{add_l2_gradient, compute_loss, l2_penalty, LossOutput, PROB_FLOOR};
pub use trainer::{train, train_with_progress, EpochRecord, Precision, TrainConfig, TrainOutcome, TrainingLog};
