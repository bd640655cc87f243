use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One labeled, irregularly sampled sequence. Timestamps are nonnegative
/// integer acquisition indices; `horizon` is the nominal end of the season.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub id: String,
    pub label: usize,
    pub timestamps: Vec<usize>,
    pub observations: Vec<Vec<f64>>,
    pub horizon: usize,
}

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn feature_dim(&self) -> Option<usize> {
        self.observations.first().map(Vec::len)
    }

    pub fn last_time(&self) -> Option<usize> {
        self.timestamps.last().copied()
    }

    /// Checks the structural invariants; `d` and `classes` are checked when
    /// given.
    pub fn validate(&self, d: Option<usize>, classes: Option<usize>) -> Result<()> {
        if self.timestamps.is_empty() {
            return Err(Error::Validation(format!("series {:?} has no observations", self.id)));
        }
        if self.timestamps.len() != self.observations.len() {
            return Err(Error::Validation(format!(
                "series {:?}: {} timestamps but {} observations",
                self.id,
                self.timestamps.len(),
                self.observations.len()
            )));
        }
        if self.timestamps.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Validation(format!(
                "series {:?}: timestamps are not strictly increasing",
                self.id
            )));
        }
        let width = d.unwrap_or(self.observations[0].len());
        if width == 0 {
            return Err(Error::Validation(format!("series {:?} has zero-width observations", self.id)));
        }
        for obs in &self.observations {
            if obs.len() != width {
                return Err(Error::Validation(format!(
                    "series {:?}: observation width {} differs from {width}",
                    self.id,
                    obs.len()
                )));
            }
            if obs.iter().any(|v| !v.is_finite()) {
                return Err(Error::Validation(format!("series {:?} has non-finite values", self.id)));
            }
        }
        if self.horizon < *self.timestamps.last().expect("nonempty") {
            return Err(Error::Validation(format!(
                "series {:?}: horizon {} precedes the last timestamp",
                self.id, self.horizon
            )));
        }
        if let Some(k) = classes {
            if self.label >= k {
                return Err(Error::Validation(format!(
                    "series {:?}: label {} not below K={k}",
                    self.id, self.label
                )));
            }
        }
        Ok(())
    }

    /// Keeps the observations whose index satisfies `keep`.
    pub(crate) fn filter_indices(&self, keep: impl Fn(usize) -> bool) -> TimeSeries {
        let mut out = TimeSeries {
            id: self.id.clone(),
            label: self.label,
            timestamps: Vec::new(),
            observations: Vec::new(),
            horizon: self.horizon,
        };
        for i in 0..self.len() {
            if keep(i) {
                out.timestamps.push(self.timestamps[i]);
                out.observations.push(self.observations[i].clone());
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub series: Vec<TimeSeries>,
    pub num_classes: usize,
    pub feature_dim: usize,
    pub nominal_length: usize,
    pub missing_rate: f64,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::Validation(format!("K={} must be at least 2", self.num_classes)));
        }
        if self.feature_dim == 0 {
            return Err(Error::Validation("feature dimension must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.missing_rate) {
            return Err(Error::Validation(format!(
                "missing rate {} outside [0,1)",
                self.missing_rate
            )));
        }
        for s in &self.series {
            s.validate(Some(self.feature_dim), Some(self.num_classes))?;
        }
        Ok(())
    }

    /// Same metadata, different series.
    pub fn with_series(&self, series: Vec<TimeSeries>) -> Dataset {
        Dataset {
            series,
            num_classes: self.num_classes,
            feature_dim: self.feature_dim,
            nominal_length: self.nominal_length,
            missing_rate: self.missing_rate,
        }
    }

    pub fn labels(&self) -> Vec<usize> {
        self.series.iter().map(|s| s.label).collect()
    }

    /// Fraction of the nominal grid with no observation.
    pub fn empirical_missing_rate(&self) -> f64 {
        if self.series.is_empty() || self.nominal_length == 0 {
            return 0.0;
        }
        let seen: usize = self.series.iter().map(TimeSeries::len).sum();
        1.0 - seen as f64 / (self.series.len() * self.nominal_length) as f64
    }
}
