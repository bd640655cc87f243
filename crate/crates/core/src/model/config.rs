use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cells::{CellKind, GatingConfig};
use crate::error::{Error, Result};
use crate::node::SolveConfig;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeFeatures {
    #[default]
    None,
    /// Append the gap since the previous observation.
    DeltaT,
    /// Add a sinusoidal encoding of the day since the first observation.
    Pe,
}

impl FromStr for TimeFeatures {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(TimeFeatures::None),
            "delta_t" | "dt" => Ok(TimeFeatures::DeltaT),
            "pe" => Ok(TimeFeatures::Pe),
            other => Err(Error::Config(format!("unknown time-feature mode {other:?}"))),
        }
    }
}

impl fmt::Display for TimeFeatures {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TimeFeatures::None => "none",
            TimeFeatures::DeltaT => "delta_t",
            TimeFeatures::Pe => "pe",
        })
    }
}

/// What a model without ODE dynamics does between its last observation and
/// the horizon.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extrapolation {
    #[default]
    HoldLast,
    /// Feed the global channel-wise mean input at every remaining step.
    ChannelMean,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub cell: CellKind,
    pub hidden_dim: usize,
    pub f_theta_units: usize,
    pub f_theta_layers: usize,
    pub ode_enabled: bool,
    pub time_features: TimeFeatures,
    pub pe_tau: f64,
    pub gating: GatingConfig,
    pub num_classes: usize,
    pub feature_dim: usize,
    pub solve: SolveConfig,
    /// Feed `t / time_scale` to the dynamics network.
    pub time_input: bool,
    pub time_scale: f64,
    pub init_sigma: f64,
    pub extrapolation: Extrapolation,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            cell: CellKind::Gru,
            hidden_dim: 80,
            f_theta_units: 255,
            f_theta_layers: 2,
            ode_enabled: true,
            time_features: TimeFeatures::None,
            pe_tau: 1000.0,
            gating: GatingConfig::default(),
            num_classes: 19,
            feature_dim: 54,
            solve: SolveConfig::default(),
            time_input: false,
            time_scale: 100.0,
            init_sigma: 1e-4,
            extrapolation: Extrapolation::HoldLast,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.hidden_dim == 0 || self.f_theta_units == 0 {
            return bad("hidden_dim and f_theta_units must be positive".into());
        }
        if self.f_theta_layers != 2 {
            return bad(format!("f_theta has exactly 2 layers, got {}", self.f_theta_layers));
        }
        if self.num_classes < 2 {
            return bad(format!("need K >= 2, got {}", self.num_classes));
        }
        if self.feature_dim == 0 {
            return bad("feature_dim must be positive".into());
        }
        if !(self.pe_tau > 0.0) {
            return bad(format!("pe_tau must be positive, got {}", self.pe_tau));
        }
        if !(self.init_sigma >= 0.0) {
            return bad(format!("init_sigma must be nonnegative, got {}", self.init_sigma));
        }
        if self.time_input && !(self.time_scale > 0.0) {
            return bad("time_scale must be positive".into());
        }
        if self.solve.steps_multiplier == 0 {
            return bad("steps_multiplier must be at least 1".into());
        }
        if self.gating.depth == 0 || self.gating.depth > 2 || self.gating.width == 0 {
            return bad(format!("invalid gating {:?}", self.gating));
        }
        Ok(())
    }

    /// Width of the vectors the recurrent cell consumes.
    pub fn cell_input_dim(&self) -> usize {
        self.feature_dim + usize::from(self.time_features == TimeFeatures::DeltaT)
    }

    /// Short name in the style `ode-gru`, `gru-dt`, `lstm-pe`.
    pub fn name(&self) -> String {
        let mut s = String::new();
        if self.ode_enabled {
            s.push_str("ode-");
        }
        s.push_str(match self.cell {
            CellKind::Tanh => "rnn",
            CellKind::Lstm => "lstm",
            CellKind::Gru => "gru",
        });
        match self.time_features {
            TimeFeatures::None => {}
            TimeFeatures::DeltaT => s.push_str("-dt"),
            TimeFeatures::Pe => s.push_str("-pe"),
        }
        s
    }

    /// Applies a model name (`[ode-]{rnn|lstm|gru}[-dt|-pe]`) to a base config.
    pub fn from_name(name: &str, base: &ModelConfig) -> Result<ModelConfig> {
        let mut rest = name.trim().to_ascii_lowercase();
        let mut cfg = base.clone();
        cfg.ode_enabled = false;
        cfg.time_features = TimeFeatures::None;
        if let Some(r) = rest.strip_prefix("ode-") {
            cfg.ode_enabled = true;
            rest = r.to_string();
        }
        if let Some(r) = rest.strip_suffix("-dt") {
            cfg.time_features = TimeFeatures::DeltaT;
            rest = r.to_string();
        } else if let Some(r) = rest.strip_suffix("-pe") {
            cfg.time_features = TimeFeatures::Pe;
            rest = r.to_string();
        }
        cfg.cell = rest
            .parse()
            .map_err(|_| Error::Config(format!("unknown model name {name:?}")))?;
        Ok(cfg)
    }
}
