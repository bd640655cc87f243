use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensorcore::ParamStore;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamaxConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamaxConfig {
    fn default() -> Self {
        AdamaxConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First moments `m`, infinity-norm accumulators `u` and the step count,
/// one buffer per parameter in store order.
#[derive(Clone, Debug, PartialEq)]
pub struct Adamax {
    pub config: AdamaxConfig,
    pub t: u64,
    pub m: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
}

impl Adamax {
    pub fn new(params: &ParamStore, config: AdamaxConfig) -> Self {
        Adamax {
            config,
            t: 0,
            m: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            u: params.iter().map(|p| vec![0.0; p.len()]).collect(),
        }
    }

    /// One update with learning rate `lr` from the gradients in `params`.
    pub fn step(&mut self, params: &mut ParamStore, lr: f64) -> Result<()> {
        if self.m.len() != params.len() {
            return Err(Error::State("optimizer state does not match the parameter store".into()));
        }
        if let Some(p) = params.iter().find(|p| p.grad.iter().any(|g| !g.is_finite())) {
            return Err(Error::Numeric(format!("gradient of {} is not finite", p.name)));
        }
        let AdamaxConfig { beta1, beta2, eps } = self.config;
        self.t += 1;
        let step = lr / (1.0 - beta1.powi(self.t.min(i32::MAX as u64) as i32));
        for ((p, m), u) in params.iter_mut().zip(&mut self.m).zip(&mut self.u) {
            for (((v, &g), mi), ui) in p.value.iter_mut().zip(&p.grad).zip(m.iter_mut()).zip(u.iter_mut()) {
                *mi = beta1 * *mi + (1.0 - beta1) * g;
                *ui = (beta2 * *ui).max(g.abs());
                *v -= step * *mi / (*ui + eps);
            }
        }
        Ok(())
    }
}

/// `lr0 · decay^k`.
pub fn lr_schedule(k: u64, lr0: f64, decay: f64) -> f64 {
    lr0 * decay.powf(k as f64)
}
