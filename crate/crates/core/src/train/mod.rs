//! Loss, optimizer, schedule, regularizer and the training loop.

pub mod fit;
pub mod loss;
pub mod optim;
pub mod regularize;

pub use fit::{channel_means, fit, fit_with_progress, train_step, BatchRecord, EpochRecord, FitOutput, History, TrainConfig};
pub use loss::{batch_cross_entropy, cross_entropy, PROB_FLOOR};
pub use optim::{lr_schedule, Adamax, AdamaxConfig};
pub use regularize::subsample;
