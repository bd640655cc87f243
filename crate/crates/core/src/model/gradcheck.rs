//! Finite-difference checks of the full model gradient.

use rand::Rng as _;

use crate::cells::CellKind;
use crate::data::TimeSeries;
use crate::error::Result;
use crate::model::config::{ModelConfig, TimeFeatures};
use crate::model::encoder::{ForwardOptions, Network};
use crate::rng::{hash_str, rng_from};
use crate::tensorcore::{grad_check, GradCheckReport, ParamStore};
use crate::train::loss::batch_cross_entropy;

/// Series with uniform random features at the given timestamps.
pub fn toy_series(id: &str, label: usize, times: &[usize], horizon: usize, d: usize, seed: u64) -> TimeSeries {
    let mut rng = rng_from(seed, &[hash_str(id)]);
    TimeSeries {
        id: id.into(),
        label,
        timestamps: times.to_vec(),
        observations: times
            .iter()
            .map(|_| (0..d).map(|_| rng.random_range(-1.5..1.5)).collect())
            .collect(),
        horizon,
    }
}

/// H=4, U=5, d=3, K=3.
pub fn toy_config(cell: CellKind, ode: bool, tf: TimeFeatures) -> ModelConfig {
    ModelConfig {
        cell,
        hidden_dim: 4,
        f_theta_units: 5,
        ode_enabled: ode,
        time_features: tf,
        num_classes: 3,
        feature_dim: 3,
        init_sigma: 0.1,
        seed: 11,
        ..ModelConfig::default()
    }
}

/// Spreads every parameter, biases and batch-norm affine terms included,
/// over a range so no derivative is trivially zero.
pub fn randomize(store: &mut ParamStore, seed: u64, scale: f64) {
    let mut rng = rng_from(seed, &[77]);
    for p in store.iter_mut() {
        let gamma_like = p.name.ends_with("gamma");
        for v in p.value.iter_mut() {
            *v = if gamma_like {
                1.0 + rng.random_range(-0.3..0.3)
            } else {
                rng.random_range(-scale..scale)
            };
        }
    }
}

fn batch_loss(net: &Network, store: &ParamStore, batch: &[&TimeSeries], opts: &ForwardOptions) -> Result<f64> {
    let fwd = net.forward(store, batch, opts)?;
    let labels: Vec<usize> = batch.iter().map(|s| s.label).collect();
    Ok(batch_cross_entropy(&fwd.probs, &labels)?.0)
}

/// Train-mode cross-entropy gradient of a randomized `cfg` model on `batch`
/// against central differences.
pub fn model_grad_check(cfg: ModelConfig, batch: &[&TimeSeries], tol: f64) -> Result<GradCheckReport> {
    let (mut net, mut store) = Network::build(cfg)?;
    randomize(&mut store, 3, 0.6);
    let h = net.config.hidden_dim;
    net.bn_update.running.mean = (0..h).map(|i| 0.1 * (i as f64 - 1.0)).collect();
    net.bn_update.running.var = (0..h).map(|i| 0.6 + 0.2 * i as f64).collect();
    let opts = ForwardOptions {
        keep_tape: false,
        ..ForwardOptions::train(1)
    };
    let fwd = net.forward(&store, batch, &ForwardOptions::train(1))?;
    let labels: Vec<usize> = batch.iter().map(|s| s.label).collect();
    let (_, dlogits) = batch_cross_entropy(&fwd.probs, &labels)?;
    store.zero_grads();
    net.backward(&mut store, &fwd, &dlogits)?;
    grad_check(&store, |s| batch_loss(&net, s, batch, &opts), tol)
}

/// Every cell with ODE on and off under each time-feature mode, on a single
/// three-observation series.
pub fn grad_check_suite(tol: f64) -> Result<Vec<(String, GradCheckReport)>> {
    let s = toy_series("toy", 2, &[0, 2, 5], 7, 3, 1);
    let mut out = Vec::new();
    for cell in [CellKind::Tanh, CellKind::Lstm, CellKind::Gru] {
        for ode in [true, false] {
            for tf in [TimeFeatures::None, TimeFeatures::DeltaT, TimeFeatures::Pe] {
                let cfg = toy_config(cell, ode, tf);
                let report = model_grad_check(cfg.clone(), &[&s], tol)?;
                out.push((cfg.name(), report));
            }
        }
    }
    Ok(out)
}
