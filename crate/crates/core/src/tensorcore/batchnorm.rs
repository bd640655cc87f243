//! Batch normalization over the rows of a matrix.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensorcore::matrix::Matrix;
use crate::tensorcore::params::{Init, ParamId, ParamStore};

pub const DEFAULT_EPS: f64 = 1e-5;
pub const DEFAULT_MOMENTUM: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BnMode {
    Train,
    Eval,
}

/// Running statistics, serialized into checkpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunningStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub dim: usize,
    pub running: RunningStats,
    pub eps: f64,
    pub momentum: f64,
}

/// Statistics of one train-mode application, kept until committed.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub count: usize,
}

#[derive(Clone, Debug)]
pub struct BnCache {
    xhat: Matrix,
    inv_std: Vec<f64>,
    /// Present when batch statistics were used.
    pub stats: Option<BatchStats>,
}

impl BatchNorm {
    pub fn register(store: &mut ParamStore, prefix: &str, dim: usize) -> Result<Self> {
        Self::with_constants(store, prefix, dim, DEFAULT_EPS, DEFAULT_MOMENTUM)
    }

    pub fn with_constants(
        store: &mut ParamStore,
        prefix: &str,
        dim: usize,
        eps: f64,
        momentum: f64,
    ) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(Error::Config(format!("batch norm eps must be positive, got {eps}")));
        }
        if !(0.0..=1.0).contains(&momentum) {
            return Err(Error::Config(format!("batch norm momentum {momentum} outside [0,1]")));
        }
        let gamma = store.register(&format!("{prefix}.gamma"), &[dim], Init::Constant(1.0), 0)?;
        let beta = store.register(&format!("{prefix}.beta"), &[dim], Init::Zeros, 0)?;
        Ok(BatchNorm {
            gamma,
            beta,
            dim,
            running: RunningStats {
                mean: vec![0.0; dim],
                var: vec![1.0; dim],
            },
            eps,
            momentum,
        })
    }

    /// Train mode normalizes with the batch's own mean and population
    /// variance; eval mode uses the running statistics.
    pub fn forward(&self, store: &ParamStore, x: &Matrix, mode: BnMode) -> Result<(Matrix, BnCache)> {
        if x.cols() != self.dim {
            return Err(Error::dim(format!(
                "batch norm over {} features got width {}",
                self.dim,
                x.cols()
            )));
        }
        let gamma = store.value(self.gamma);
        let beta = store.value(self.beta);
        match mode {
            BnMode::Train => {
                let (mean, var) = batch_moments(x)?;
                let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + self.eps).sqrt()).collect();
                let (y, xhat) = apply(x, &mean, &inv_std, gamma, beta);
                Ok((
                    y,
                    BnCache {
                        xhat,
                        inv_std,
                        stats: Some(BatchStats {
                            mean,
                            var,
                            count: x.rows(),
                        }),
                    },
                ))
            }
            BnMode::Eval => {
                let inv_std: Vec<f64> = self
                    .running
                    .var
                    .iter()
                    .map(|v| 1.0 / (v + self.eps).sqrt())
                    .collect();
                let (y, xhat) = apply(x, &self.running.mean, &inv_std, gamma, beta);
                Ok((
                    y,
                    BnCache {
                        xhat,
                        inv_std,
                        stats: None,
                    },
                ))
            }
        }
    }

    /// Accumulates gamma/beta gradients and returns the input gradient.
    pub fn backward(&self, store: &mut ParamStore, cache: &BnCache, dy: &Matrix) -> Matrix {
        let n = dy.rows();
        let h = self.dim;
        let mut sum_dy = vec![0.0; h];
        let mut sum_dy_xhat = vec![0.0; h];
        for r in 0..n {
            for j in 0..h {
                let g = dy.get(r, j);
                sum_dy[j] += g;
                sum_dy_xhat[j] += g * cache.xhat.get(r, j);
            }
        }
        {
            let dgamma = &mut store.get_mut(self.gamma).grad;
            for j in 0..h {
                dgamma[j] += sum_dy_xhat[j];
            }
        }
        {
            let dbeta = &mut store.get_mut(self.beta).grad;
            for j in 0..h {
                dbeta[j] += sum_dy[j];
            }
        }
        let gamma = store.value(self.gamma);
        let mut dx = Matrix::zeros(n, h);
        match cache.stats {
            Some(_) => {
                let nf = n as f64;
                for r in 0..n {
                    for j in 0..h {
                        let v = gamma[j] * cache.inv_std[j] / nf
                            * (nf * dy.get(r, j) - sum_dy[j] - cache.xhat.get(r, j) * sum_dy_xhat[j]);
                        dx.set(r, j, v);
                    }
                }
            }
            None => {
                for r in 0..n {
                    for j in 0..h {
                        dx.set(r, j, gamma[j] * cache.inv_std[j] * dy.get(r, j));
                    }
                }
            }
        }
        dx
    }

    /// Folds one batch's statistics into the running estimates. The running
    /// variance uses the unbiased estimate when more than one row was seen.
    pub fn commit(&mut self, stats: &BatchStats) {
        let m = self.momentum;
        let correction = if stats.count > 1 {
            stats.count as f64 / (stats.count - 1) as f64
        } else {
            1.0
        };
        for j in 0..self.dim {
            self.running.mean[j] = (1.0 - m) * self.running.mean[j] + m * stats.mean[j];
            self.running.var[j] = (1.0 - m) * self.running.var[j] + m * stats.var[j] * correction;
        }
    }
}

fn batch_moments(x: &Matrix) -> Result<(Vec<f64>, Vec<f64>)> {
    if x.rows() == 0 {
        return Err(Error::EmptyBatch);
    }
    let n = x.rows() as f64;
    let mut mean = vec![0.0; x.cols()];
    for r in 0..x.rows() {
        for (m, v) in mean.iter_mut().zip(x.row(r)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; x.cols()];
    for r in 0..x.rows() {
        for ((s, v), m) in var.iter_mut().zip(x.row(r)).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    var.iter_mut().for_each(|s| *s /= n);
    Ok((mean, var))
}

fn apply(x: &Matrix, mean: &[f64], inv_std: &[f64], gamma: &[f64], beta: &[f64]) -> (Matrix, Matrix) {
    let mut xhat = Matrix::zeros(x.rows(), x.cols());
    let mut y = Matrix::zeros(x.rows(), x.cols());
    for r in 0..x.rows() {
        for j in 0..x.cols() {
            let h = (x.get(r, j) - mean[j]) * inv_std[j];
            xhat.set(r, j, h);
            y.set(r, j, gamma[j] * h + beta[j]);
        }
    }
    (y, xhat)
}

/// Stateless train-mode normalization of a list of vectors.
pub fn normalize_batch(batch: &[Vec<f64>], gamma: &[f64], beta: &[f64], eps: f64) -> Result<Vec<Vec<f64>>> {
    if eps < 0.0 {
        return Err(Error::Config(format!("eps must be nonnegative, got {eps}")));
    }
    let x = Matrix::from_rows(batch)?;
    if x.rows() > 0 && (gamma.len() != x.cols() || beta.len() != x.cols()) {
        return Err(Error::dim("gamma/beta length must equal feature width"));
    }
    let (mean, var) = batch_moments(&x)?;
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
    Ok(apply(&x, &mean, &inv_std, gamma, beta).0.to_rows())
}
