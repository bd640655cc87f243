pub mod cells;
pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
mod fsutil;
pub mod model;
pub mod node;
pub mod rng;
pub mod tensorcore;
pub mod train;

pub use error::{Error, Result};
