//! The ODE-RNN classifier and its baselines.

pub mod checkpoint;
pub mod config;
pub mod encoder;
pub mod features;
pub mod gradcheck;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, ParamEntry, CHECKPOINT_VERSION};
pub use config::{Extrapolation, ModelConfig, TimeFeatures};
pub use encoder::{argmax, Forward, ForwardOptions, Network, SequenceEncoder};
pub use features::{augment_inputs, init_hidden, positional_encoding};
pub use gradcheck::{grad_check_suite, model_grad_check};
