use rand::Rng as _;

use crate::data::TimeSeries;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Keeps each observation independently with probability `p`, redrawing
/// until at least one survives. `p = 1` returns the series untouched
/// without drawing.
pub fn subsample(series: &TimeSeries, p: f64, rng: &mut Rng) -> Result<TimeSeries> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Config(format!("keep probability {p} outside (0, 1]")));
    }
    if p == 1.0 || series.is_empty() {
        return Ok(series.clone());
    }
    loop {
        let keep: Vec<bool> = (0..series.len()).map(|_| rng.random::<f64>() < p).collect();
        if keep.iter().any(|&k| k) {
            return Ok(series.filter_indices(|i| keep[i]));
        }
    }
}
