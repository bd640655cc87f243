//! Metrics, evaluation and the experiment sweeps.

pub mod metrics;
pub mod run;
pub mod sweep;

pub use metrics::{accuracy, confusion, macro_f1, ConfusionMatrix};
pub use run::{confusion_csv, metrics_csv, metrics_json, parse_confusion_csv, predict_all, run_eval, write_metrics, Metrics};
pub use sweep::{sweep, SweepData, SweepKind, SweepReport, SweepSpec};
