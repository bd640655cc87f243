//! Series and dataset transforms used by the experiment sweeps.

use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::data::series::{Dataset, TimeSeries};
use crate::error::{Error, Result};
use crate::rng::{rng_from, Rng};

fn check_fraction(fraction: f64) -> Result<()> {
    if fraction > 0.0 && fraction <= 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("fraction {fraction} outside (0, 1]")))
    }
}

/// Keeps observations with `t < floor(fraction·T)`. The horizon stays put,
/// so an ODE model still extrapolates to the end of the season.
pub fn truncate_leading(series: &TimeSeries, fraction: f64, nominal_length: usize) -> Result<TimeSeries> {
    check_fraction(fraction)?;
    let cutoff = (fraction * nominal_length as f64).floor() as usize;
    let out = series.filter_indices(|i| series.timestamps[i] < cutoff);
    if out.is_empty() {
        return Err(Error::EmptyResult(format!(
            "series {:?} has no observation before t={cutoff}",
            series.id
        )));
    }
    Ok(out)
}

/// Keeps `round(fraction·count)` observations (at least one) chosen
/// uniformly without replacement, in their original order.
pub fn sparsify(series: &TimeSeries, fraction: f64, rng: &mut Rng) -> Result<TimeSeries> {
    check_fraction(fraction)?;
    let n = series.len();
    let keep = ((fraction * n as f64).round() as usize).clamp(1, n.max(1));
    if keep >= n {
        return Ok(series.clone());
    }
    let mut chosen = index::sample(rng, n, keep).into_vec();
    chosen.sort_unstable();
    let mut mask = vec![false; n];
    chosen.into_iter().for_each(|i| mask[i] = true);
    Ok(series.filter_indices(|i| mask[i]))
}

/// Uniform subset of `round(fraction·n)` series, original order kept.
pub fn subset(ds: &Dataset, fraction: f64, rng: &mut Rng) -> Result<Dataset> {
    check_fraction(fraction)?;
    let n = ds.len();
    let keep = (fraction * n as f64).round() as usize;
    if keep == 0 {
        return Err(Error::EmptyResult(format!("{fraction} of {n} series rounds to zero")));
    }
    if keep >= n {
        return Ok(ds.clone());
    }
    let mut chosen = index::sample(rng, n, keep).into_vec();
    chosen.sort_unstable();
    Ok(ds.with_series(chosen.into_iter().map(|i| ds.series[i].clone()).collect()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        SplitFractions {
            train: 0.64,
            val: 0.16,
            test: 0.20,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Splits {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
}

/// Seeded shuffle, then partition into train/val/test.
pub fn split(ds: &Dataset, fractions: SplitFractions, seed: u64) -> Result<Splits> {
    let SplitFractions { train, val, test } = fractions;
    if [train, val, test].iter().any(|f| !(0.0..=1.0).contains(f)) || ((train + val + test) - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "split fractions {train}/{val}/{test} must be in [0,1] and sum to 1"
        )));
    }
    let n = ds.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from(seed, &[0x5911]));
    let n_train = ((train * n as f64).round() as usize).min(n);
    let n_val = ((val * n as f64).round() as usize).min(n - n_train);
    let pick = |idx: &[usize]| ds.with_series(idx.iter().map(|&i| ds.series[i].clone()).collect());
    Ok(Splits {
        train: pick(&order[..n_train]),
        val: pick(&order[n_train..n_train + n_val]),
        test: pick(&order[n_train + n_val..]),
    })
}
