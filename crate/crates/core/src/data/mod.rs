//! Time-series containers, synthetic generation, JSONL persistence and the
//! transforms behind the experiment sweeps.

pub mod io;
pub mod series;
pub mod synth;
pub mod transforms;

pub use io::{from_jsonl, load_jsonl, save_jsonl, to_jsonl};
pub use series::{Dataset, TimeSeries};
pub use synth::{generate, ClassTemplate, SynthSpec};
pub use transforms::{sparsify, split, subset, truncate_leading, SplitFractions, Splits};
