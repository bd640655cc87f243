//! Synthetic phenology-under-clouds data.
//!
//! Each class follows a Gaussian bump in time with its own peak, width and
//! per-feature amplitude. Observations sit on the integer grid `0..T`; each
//! grid point is dropped independently with the missing rate, and the kept
//! values carry additive Gaussian noise.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::series::{Dataset, TimeSeries};
use crate::error::{Error, Result};
use crate::rng::rng_from;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassTemplate {
    pub peak: f64,
    pub width: f64,
    pub amplitude: Vec<f64>,
}

impl ClassTemplate {
    pub fn value(&self, t: f64) -> Vec<f64> {
        let z = (t - self.peak) / self.width;
        let bump = (-0.5 * z * z).exp();
        self.amplitude.iter().map(|a| a * bump).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub num_classes: usize,
    pub feature_dim: usize,
    pub length: usize,
    pub missing_rate: f64,
    pub noise_std: f64,
    pub n_series: usize,
    pub seed: u64,
    /// Class peaks are spread over this fraction range of `T`.
    pub peak_range: (f64, f64),
    /// Bump widths (standard deviations) as a fraction range of `T`.
    pub width_range: (f64, f64),
    pub amplitude_range: (f64, f64),
    /// Explicit templates; drawn from `seed` when absent.
    pub templates: Option<Vec<ClassTemplate>>,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            num_classes: 4,
            feature_dim: 6,
            length: 40,
            missing_rate: 0.5,
            noise_std: 0.3,
            n_series: 3000,
            seed: 0,
            peak_range: (0.25, 0.75),
            width_range: (0.08, 0.16),
            amplitude_range: (0.5, 1.5),
            templates: None,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.num_classes < 2 {
            return bad(format!("need at least 2 classes, got {}", self.num_classes));
        }
        if self.feature_dim == 0 {
            return bad("feature_dim must be positive".into());
        }
        if self.length < 2 {
            return bad(format!("series length must be at least 2, got {}", self.length));
        }
        if !(0.0..1.0).contains(&self.missing_rate) {
            return bad(format!("missing rate {} outside [0,1)", self.missing_rate));
        }
        if !(self.noise_std >= 0.0) || !self.noise_std.is_finite() {
            return bad(format!("noise_std {} must be finite and nonnegative", self.noise_std));
        }
        if self.n_series == 0 {
            return bad("n_series must be positive".into());
        }
        let ordered = |(a, b): (f64, f64)| a.is_finite() && b.is_finite() && a <= b;
        if !ordered(self.peak_range) || !ordered(self.width_range) || !ordered(self.amplitude_range) {
            return bad("template ranges must be finite with lo <= hi".into());
        }
        if self.width_range.0 <= 0.0 {
            return bad("template widths must be positive".into());
        }
        if let Some(t) = &self.templates {
            if t.len() != self.num_classes {
                return bad(format!("{} templates for {} classes", t.len(), self.num_classes));
            }
            if t.iter().any(|c| c.amplitude.len() != self.feature_dim || !(c.width > 0.0)) {
                return bad("template amplitude width or bump width is invalid".into());
            }
        }
        Ok(())
    }

    /// Class templates: the explicit ones, or a draw keyed by the seed.
    /// Peaks are stratified so every class gets its own slot of the range.
    pub fn class_templates(&self) -> Vec<ClassTemplate> {
        if let Some(t) = &self.templates {
            return t.clone();
        }
        let mut rng = rng_from(self.seed, &[u64::MAX]);
        let t = self.length as f64;
        let k = self.num_classes;
        let mut slots: Vec<usize> = (0..k).collect();
        slots.shuffle(&mut rng);
        let (plo, phi) = self.peak_range;
        let (wlo, whi) = self.width_range;
        let (alo, ahi) = self.amplitude_range;
        slots
            .into_iter()
            .map(|slot| {
                let frac = plo + (phi - plo) * (slot as f64 + rng.random::<f64>()) / k as f64;
                let width = t * (wlo + (whi - wlo) * rng.random::<f64>());
                let amplitude = (0..self.feature_dim)
                    .map(|_| alo + (ahi - alo) * rng.random::<f64>())
                    .collect();
                ClassTemplate {
                    peak: frac * t,
                    width,
                    amplitude,
                }
            })
            .collect()
    }
}

/// Draws a dataset. Labels are balanced within ±1; series `i` uses its own
/// stream keyed by `(seed, i)`.
pub fn generate(spec: &SynthSpec) -> Result<Dataset> {
    spec.validate()?;
    let templates = spec.class_templates();
    let mut labels: Vec<usize> = (0..spec.n_series).map(|i| i % spec.num_classes).collect();
    labels.shuffle(&mut rng_from(spec.seed, &[u64::MAX - 1]));
    let noise = Normal::new(0.0, spec.noise_std).map_err(|e| Error::Config(e.to_string()))?;
    let keep_prob = 1.0 - spec.missing_rate;
    let series = labels
        .into_iter()
        .enumerate()
        .map(|(i, label)| {
            let mut rng = rng_from(spec.seed, &[i as u64]);
            let timestamps = loop {
                let kept: Vec<usize> = (0..spec.length)
                    .filter(|_| rng.random::<f64>() < keep_prob)
                    .collect();
                if !kept.is_empty() {
                    break kept;
                }
            };
            let template = &templates[label];
            let observations = timestamps
                .iter()
                .map(|&t| {
                    template
                        .value(t as f64)
                        .into_iter()
                        .map(|v| v + noise.sample(&mut rng))
                        .collect()
                })
                .collect();
            TimeSeries {
                id: format!("s{i:06}"),
                label,
                timestamps,
                observations,
                horizon: spec.length - 1,
            }
        })
        .collect();
    Ok(Dataset {
        series,
        num_classes: spec.num_classes,
        feature_dim: spec.feature_dim,
        nominal_length: spec.length,
        missing_rate: spec.missing_rate,
    })
}
