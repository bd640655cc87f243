use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand};

use crate::cells::{CellKind, GatingConfig};
use crate::data::SplitFractions;
use crate::error::{Error, Result};
use crate::eval::SweepKind;
use crate::model::{Extrapolation, ModelConfig, TimeFeatures};
use crate::node::{GradientMode, SolveConfig};
use crate::train::{AdamaxConfig, TrainConfig};

/// ODE-RNN classifiers for irregularly sampled time series.
///
/// Settings resolve as: command-line flags, then the `--config` file
/// (TOML, or JSON for `.json` paths; keys are flag names), then `IRREGTS_*`
/// environment variables, then the defaults shown below.
#[derive(Debug, Parser)]
#[command(name = "irregts", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset as JSONL
    Generate(GenerateArgs),
    /// Train a model and write a checkpoint plus the loss history
    Train(TrainArgs),
    /// Evaluate a checkpoint on one split of a dataset
    Eval(EvalArgs),
    /// Run an experiment sweep over seeds and conditions
    Sweep(SweepArgs),
    /// Render sweep summaries or confusion matrices as SVG
    Plot(PlotArgs),
    /// Check the full-model gradients against finite differences
    Gradcheck(GradcheckArgs),
}

pub fn parse_switch(s: &str) -> std::result::Result<bool, String> {
    match s.to_ascii_lowercase().as_str() {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        _ => Err(format!("expected on or off, got {s:?}")),
    }
}

fn parse_extrapolation(s: &str) -> std::result::Result<Extrapolation, String> {
    match s {
        "hold-last" | "hold_last" => Ok(Extrapolation::HoldLast),
        "channel-mean" | "channel_mean" => Ok(Extrapolation::ChannelMean),
        _ => Err(format!("expected hold-last or channel-mean, got {s:?}")),
    }
}

fn parse_gradient_mode(s: &str) -> std::result::Result<GradientMode, String> {
    match s {
        "discrete" => Ok(GradientMode::Discrete),
        "adjoint" => Ok(GradientMode::Adjoint),
        _ => Err(format!("expected discrete or adjoint, got {s:?}")),
    }
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct GenerateArgs {
    /// Number of classes K
    #[arg(long, env = "IRREGTS_CLASSES", default_value_t = 4)]
    pub classes: usize,
    /// Feature dimension d
    #[arg(long, env = "IRREGTS_FEATURES", default_value_t = 6)]
    pub features: usize,
    /// Nominal series length T
    #[arg(long, env = "IRREGTS_LENGTH", default_value_t = 40)]
    pub length: usize,
    /// Probability that a time step is unobserved
    #[arg(long, env = "IRREGTS_MISSING", default_value_t = 0.5)]
    pub missing: f64,
    /// Observation noise standard deviation
    #[arg(long, env = "IRREGTS_NOISE", default_value_t = 0.3)]
    pub noise: f64,
    /// Number of series
    #[arg(long, env = "IRREGTS_N", default_value_t = 3000)]
    pub n: usize,
    #[arg(long, env = "IRREGTS_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Output JSONL path
    #[arg(long, env = "IRREGTS_OUT")]
    pub out: PathBuf,
    /// Config file
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Recurrent cell: tanh, lstm or gru
    #[arg(long, env = "IRREGTS_CELL", default_value = "gru")]
    pub cell: CellKind,
    /// Latent ODE between observations
    #[arg(long, env = "IRREGTS_ODE", default_value = "on", value_parser = parse_switch, action = ArgAction::Set)]
    pub ode: bool,
    /// Hidden size H
    #[arg(long, env = "IRREGTS_HIDDEN", default_value_t = 80)]
    pub hidden: usize,
    /// Hidden units U of the dynamics network
    #[arg(long, env = "IRREGTS_UNITS", default_value_t = 255)]
    pub units: usize,
    /// Layers of the dynamics network
    #[arg(long, env = "IRREGTS_LAYERS", default_value_t = 2)]
    pub layers: usize,
    /// Extra time inputs: none, delta_t or pe
    #[arg(long, env = "IRREGTS_TIME_FEATURES", default_value = "none")]
    pub time_features: TimeFeatures,
    /// Positional encoding period τ
    #[arg(long, env = "IRREGTS_PE_TAU", default_value_t = 1000.0)]
    pub pe_tau: f64,
    /// Hidden layers in each gate network
    #[arg(long, env = "IRREGTS_GATING_DEPTH", default_value_t = 1)]
    pub gating_depth: usize,
    /// Units per hidden gate layer
    #[arg(long, env = "IRREGTS_GATING_WIDTH", default_value_t = 100)]
    pub gating_width: usize,
    /// Euler steps per time unit
    #[arg(long, env = "IRREGTS_STEPS_MULTIPLIER", default_value_t = 1)]
    pub steps_multiplier: usize,
    /// ODE gradients: discrete or adjoint
    #[arg(long, env = "IRREGTS_GRADIENT_MODE", default_value = "discrete", value_parser = parse_gradient_mode)]
    pub gradient_mode: GradientMode,
    /// Feed scaled time to the dynamics network
    #[arg(long, env = "IRREGTS_TIME_INPUT", default_value = "off", value_parser = parse_switch, action = ArgAction::Set)]
    pub time_input: bool,
    /// Divisor applied to time before it enters the dynamics network
    #[arg(long, env = "IRREGTS_TIME_SCALE", default_value_t = 100.0)]
    pub time_scale: f64,
    /// Standard deviation of the initial hidden state
    #[arg(long, env = "IRREGTS_INIT_SIGMA", default_value_t = 1e-4)]
    pub init_sigma: f64,
    /// Non-ODE behaviour past the last observation: hold-last or channel-mean
    #[arg(long, env = "IRREGTS_EXTRAPOLATION", default_value = "hold-last", value_parser = parse_extrapolation)]
    pub extrapolation: Extrapolation,
}

impl ModelArgs {
    pub fn to_config(&self, feature_dim: usize, num_classes: usize, seed: u64) -> ModelConfig {
        ModelConfig {
            cell: self.cell,
            hidden_dim: self.hidden,
            f_theta_units: self.units,
            f_theta_layers: self.layers,
            ode_enabled: self.ode,
            time_features: self.time_features,
            pe_tau: self.pe_tau,
            gating: GatingConfig {
                depth: self.gating_depth,
                width: self.gating_width,
            },
            num_classes,
            feature_dim,
            solve: SolveConfig {
                steps_multiplier: self.steps_multiplier,
                gradient_mode: self.gradient_mode,
            },
            time_input: self.time_input,
            time_scale: self.time_scale,
            init_sigma: self.init_sigma,
            extrapolation: self.extrapolation,
            seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct OptimArgs {
    /// Initial learning rate
    #[arg(long, env = "IRREGTS_LR", default_value_t = 0.07)]
    pub lr: f64,
    /// Learning-rate decay per batch
    #[arg(long, env = "IRREGTS_DECAY", default_value_t = 0.9995)]
    pub decay: f64,
    /// Batch size [default: 500 with the ODE, 300 without]
    #[arg(long, env = "IRREGTS_BATCH_SIZE")]
    pub batch_size: Option<usize>,
    #[arg(long, env = "IRREGTS_EPOCHS", default_value_t = 12)]
    pub epochs: usize,
    /// Stop after this many batches [default: no limit]
    #[arg(long, env = "IRREGTS_MAX_BATCHES")]
    pub max_batches: Option<usize>,
    /// Keep probability p of the observation subsampling
    #[arg(long, env = "IRREGTS_P", default_value_t = 0.75)]
    pub p: f64,
    /// Observation subsampling during training
    #[arg(long, env = "IRREGTS_REGULARIZE", default_value = "on", value_parser = parse_switch, action = ArgAction::Set)]
    pub regularize: bool,
    #[arg(long, env = "IRREGTS_BETA1", default_value_t = 0.9)]
    pub beta1: f64,
    #[arg(long, env = "IRREGTS_BETA2", default_value_t = 0.999)]
    pub beta2: f64,
    #[arg(long, env = "IRREGTS_EPS", default_value_t = 1e-8)]
    pub eps: f64,
}

impl OptimArgs {
    pub fn to_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            lr0: self.lr,
            decay: self.decay,
            batch_size: self.batch_size,
            epochs: self.epochs,
            max_batches: self.max_batches,
            keep_prob: self.p,
            regularize: self.regularize,
            adamax: AdamaxConfig {
                beta1: self.beta1,
                beta2: self.beta2,
                eps: self.eps,
            },
            seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Seed of the train/val/test partition
    #[arg(long, env = "IRREGTS_SPLIT_SEED", default_value_t = 0)]
    pub split_seed: u64,
    #[arg(long, env = "IRREGTS_TRAIN_FRAC", default_value_t = 0.64)]
    pub train_frac: f64,
    #[arg(long, env = "IRREGTS_VAL_FRAC", default_value_t = 0.16)]
    pub val_frac: f64,
    #[arg(long, env = "IRREGTS_TEST_FRAC", default_value_t = 0.2)]
    pub test_frac: f64,
}

impl SplitArgs {
    pub fn fractions(&self) -> SplitFractions {
        SplitFractions {
            train: self.train_frac,
            val: self.val_frac,
            test: self.test_frac,
        }
    }
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct TrainArgs {
    /// JSONL dataset
    #[arg(long, env = "IRREGTS_DATA")]
    pub data: PathBuf,
    #[command(flatten)]
    pub split: SplitArgs,
    /// Seed of initialization, shuffling and subsampling
    #[arg(long, env = "IRREGTS_SEED", default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub optim: OptimArgs,
    /// Checkpoint path
    #[arg(long, env = "IRREGTS_OUT")]
    pub out: PathBuf,
    /// Loss history CSV [default: <out>.history.csv]
    #[arg(long, env = "IRREGTS_HISTORY")]
    pub history: Option<PathBuf>,
    /// Config file
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum SplitName {
    Train,
    Val,
    Test,
    All,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct EvalArgs {
    /// Checkpoint path
    #[arg(long, env = "IRREGTS_MODEL")]
    pub model: PathBuf,
    /// JSONL dataset
    #[arg(long, env = "IRREGTS_DATA")]
    pub data: PathBuf,
    /// Which part of the dataset to evaluate
    #[arg(long, env = "IRREGTS_SPLIT", value_enum, default_value = "test")]
    pub split: SplitName,
    #[command(flatten)]
    pub fractions: SplitArgs,
    /// Keep only the leading fraction of every season
    #[arg(long, env = "IRREGTS_TRUNCATE", default_value_t = 1.0)]
    pub truncate: f64,
    /// Output stem: writes <out>.json, <out>.csv and <out>_cm.csv
    #[arg(long, env = "IRREGTS_OUT", default_value = "metrics")]
    pub out: PathBuf,
    /// Config file
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct SweepArgs {
    /// early, sparsity, datasize or keepprob
    #[arg(long, env = "IRREGTS_KIND")]
    pub kind: SweepKind,
    /// Comma-separated conditions [default: early 1,0.75,0.5; sparsity
    /// 1,0.75,0.5,0.25; datasize 1,0.1,0.01; keepprob 0.5,0.65,0.75,0.9,1]
    #[arg(long, env = "IRREGTS_GRID", value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
    /// Comma-separated model names such as ode-gru, gru-dt, lstm-pe, rnn
    #[arg(long, env = "IRREGTS_MODELS", value_delimiter = ',', default_value = "ode-gru,gru-dt")]
    pub models: Vec<String>,
    /// Number of seeds
    #[arg(long, env = "IRREGTS_SEEDS", default_value_t = 3)]
    pub seeds: u64,
    /// First seed
    #[arg(long, env = "IRREGTS_SEED", default_value_t = 0)]
    pub seed: u64,
    /// JSONL dataset [default: the synthetic benchmark with --n series]
    #[arg(long, env = "IRREGTS_DATA")]
    pub data: Option<PathBuf>,
    /// Series generated when no dataset is given
    #[arg(long, env = "IRREGTS_N", default_value_t = 3000)]
    pub n: usize,
    #[command(flatten)]
    pub split: SplitArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub optim: OptimArgs,
    /// Worker threads
    #[arg(long, env = "IRREGTS_JOBS", default_value_t = 1)]
    pub jobs: usize,
    /// Output stem: writes <out>.csv, <out>_summary.csv and <out>.json
    #[arg(long, env = "IRREGTS_OUT", default_value = "sweep")]
    pub out: PathBuf,
    /// Config file
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
#[command(group = clap::ArgGroup::new("input").required(true).args(["summary", "confusion"]))]
pub struct PlotArgs {
    /// Sweep summary CSV, drawn as one line per model with error bars
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Confusion matrix CSV, drawn as a heatmap
    #[arg(long)]
    pub confusion: Option<PathBuf>,
    /// Metric column of the summary to draw
    #[arg(long, env = "IRREGTS_METRIC", default_value = "accuracy")]
    pub metric: String,
    /// Chart title [default: the input file name]
    #[arg(long)]
    pub title: Option<String>,
    /// SVG output path
    #[arg(long, env = "IRREGTS_OUT")]
    pub out: PathBuf,
    /// Config file
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct GradcheckArgs {
    /// Largest accepted relative error
    #[arg(long, env = "IRREGTS_TOL", default_value_t = 1e-4)]
    pub tol: f64,
    /// Optional JSON report path
    #[arg(long, env = "IRREGTS_OUT")]
    pub out: Option<PathBuf>,
    /// Config file
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl SweepArgs {
    pub fn seed_list(&self) -> Result<Vec<u64>> {
        if self.seeds == 0 {
            return Err(Error::Config("--seeds must be at least 1".into()));
        }
        Ok((self.seed..self.seed + self.seeds).collect())
    }
}
