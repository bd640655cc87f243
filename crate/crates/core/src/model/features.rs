use std::f64::consts::FRAC_PI_2;

use rand_distr::{Distribution, Normal};

use crate::data::TimeSeries;
use crate::error::{Error, Result};
use crate::model::config::TimeFeatures;
use crate::rng::Rng;

/// `H` i.i.d. draws from `N(0, sigma²)`.
pub fn init_hidden(h: usize, sigma: f64, rng: &mut Rng) -> Result<Vec<f64>> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::Config(format!("init sigma {sigma} must be finite and nonnegative")));
    }
    if sigma == 0.0 {
        return Ok(vec![0.0; h]);
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::Config(e.to_string()))?;
    Ok((0..h).map(|_| normal.sample(rng)).collect())
}

/// `sin(day / tau^(2i/d) + (π/2)·(i mod 2))`.
pub fn positional_encoding(day: f64, i: usize, d: usize, tau: f64) -> f64 {
    let phase = if i % 2 == 1 { FRAC_PI_2 } else { 0.0 };
    (day / tau.powf(2.0 * i as f64 / d as f64) + phase).sin()
}

/// Applies the time-feature mode to every observation of `series`.
pub fn augment_inputs(series: &TimeSeries, mode: TimeFeatures, tau: f64, d: usize) -> Result<TimeSeries> {
    let mut out = series.clone();
    if series.is_empty() {
        return Err(Error::EmptyInput(format!("series {:?} has no observations", series.id)));
    }
    if let Some(w) = series.feature_dim() {
        if w != d {
            return Err(Error::dim(format!(
                "series {:?} has feature width {w}, model expects {d}",
                series.id
            )));
        }
    }
    match mode {
        TimeFeatures::None => {}
        TimeFeatures::DeltaT => {
            let mut prev = series.timestamps[0];
            for (obs, &t) in out.observations.iter_mut().zip(&series.timestamps) {
                obs.push((t - prev) as f64);
                prev = t;
            }
        }
        TimeFeatures::Pe => {
            if !(tau > 0.0) {
                return Err(Error::Config(format!("PE tau must be positive, got {tau}")));
            }
            let first = series.timestamps[0];
            for (obs, &t) in out.observations.iter_mut().zip(&series.timestamps) {
                let day = (t - first) as f64;
                for (i, v) in obs.iter_mut().enumerate() {
                    *v += positional_encoding(day, i, d, tau);
                }
            }
        }
    }
    Ok(out)
}
