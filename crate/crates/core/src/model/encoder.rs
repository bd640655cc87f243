//! The alternating predict/update encoder and its classifier head.
//!
//! A batch is advanced on the shared integer time grid. Between grid points
//! every series whose horizon has not been reached takes `steps_multiplier`
//! Euler steps; at a grid point, the series observed there are normalized
//! together and passed through the recurrent cell.

use crate::cells::{Cell, CellCache, CellKind, CellState};
use crate::data::TimeSeries;
use crate::error::{Error, Result};
use crate::model::config::{Extrapolation, ModelConfig};
use crate::model::features::{augment_inputs, init_hidden};
use crate::node::solver::check_bounded;
use crate::node::{
    adjoint_step_backward, discrete_step_backward, euler_step, DynamicsNet, GradientMode, NetCache,
};
use crate::rng::{derive_seed, hash_str, rng_from};
use crate::tensorcore::{softmax_rows, BatchNorm, BatchStats, BnCache, BnMode, Linear, Matrix, ParamStore};

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate().skip(1) {
        if v > p[best] {
            best = i;
        }
    }
    best
}

/// Architecture plus batch-norm running statistics. Weights live in a
/// separate [`ParamStore`] so gradients can be written while the
/// architecture is borrowed.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    pub config: ModelConfig,
    pub cell: Cell,
    pub dynamics: Option<DynamicsNet>,
    pub bn_update: BatchNorm,
    pub bn_head: BatchNorm,
    pub head: Linear,
    /// Raw channel-wise input means, fed as pseudo-observations when
    /// extrapolating without dynamics.
    pub channel_means: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ForwardOptions {
    pub mode: BnMode,
    /// Mixed into the per-series initial-state seed.
    pub salt: u64,
    pub keep_tape: bool,
    /// Record the hidden state after every update.
    pub record: bool,
    /// Encode every series to this horizon instead of its own.
    pub horizon: Option<usize>,
}

impl ForwardOptions {
    pub fn eval() -> Self {
        ForwardOptions {
            mode: BnMode::Eval,
            salt: 0,
            keep_tape: false,
            record: false,
            horizon: None,
        }
    }

    pub fn train(salt: u64) -> Self {
        ForwardOptions {
            mode: BnMode::Train,
            salt,
            keep_tape: true,
            record: false,
            horizon: None,
        }
    }
}

enum Event {
    Solve {
        /// `None` when every row moved.
        rows: Option<Vec<usize>>,
        t: f64,
        dt: f64,
        saved: Option<(Matrix, NetCache)>,
    },
    Update {
        rows: Vec<usize>,
        pre: Matrix,
        bn: BnCache,
        cell: CellCache,
    },
}

struct Tape {
    events: Vec<Event>,
    head_bn: BnCache,
    head_x: Matrix,
}

pub struct Forward {
    pub logits: Matrix,
    pub probs: Matrix,
    /// Hidden state at the horizon, before the head.
    pub final_state: Matrix,
    /// Per series, `(t, h)` after each update when recording was requested.
    pub trajectories: Option<Vec<Vec<(usize, Vec<f64>)>>>,
    /// Euler steps and cell updates executed, summed over the batch.
    pub solver_steps: usize,
    pub updates: usize,
    tape: Option<Tape>,
}

struct Prepared {
    times: Vec<usize>,
    inputs: Vec<Vec<f64>>,
    horizon: usize,
    seed: u64,
}

impl Network {
    /// Registers every parameter in a fresh store. Initial values depend
    /// only on the seed and the parameter name.
    pub fn build(config: ModelConfig) -> Result<(Network, ParamStore)> {
        config.validate()?;
        let mut store = ParamStore::new();
        let h = config.hidden_dim;
        let cell = Cell::register(
            &mut store,
            "cell",
            config.cell,
            config.cell_input_dim(),
            h,
            config.gating,
            config.seed,
        )?;
        let dynamics = if config.ode_enabled {
            let scale = config.time_input.then_some(config.time_scale);
            Some(DynamicsNet::register(
                &mut store,
                "ode",
                h,
                config.f_theta_units,
                scale,
                config.seed,
            )?)
        } else {
            None
        };
        let bn_update = BatchNorm::register(&mut store, "bn_update", h)?;
        let bn_head = BatchNorm::register(&mut store, "bn_head", h)?;
        let head = Linear::register(
            &mut store,
            "head.W",
            Some("head.b"),
            h,
            config.num_classes,
            config.seed,
        )?;
        Ok((
            Network {
                config,
                cell,
                dynamics,
                bn_update,
                bn_head,
                head,
                channel_means: None,
            },
            store,
        ))
    }

    fn prepare(&self, series: &TimeSeries, horizon: Option<usize>, salt: u64) -> Result<Prepared> {
        let cfg = &self.config;
        if series.is_empty() {
            return Err(Error::EmptyInput(format!("series {:?} has no observations", series.id)));
        }
        series.validate(Some(cfg.feature_dim), None).map_err(|e| match e {
            Error::Validation(m) if m.contains("width") => Error::Dimension(m),
            other => other,
        })?;
        let horizon = horizon.unwrap_or(series.horizon);
        let last = series.last_time().expect("nonempty");
        if horizon < last {
            return Err(Error::Ordering {
                prev: last as i64,
                next: horizon as i64,
            });
        }
        let extended;
        let mut source = series;
        if !cfg.ode_enabled && cfg.extrapolation == Extrapolation::ChannelMean && horizon > last {
            let means = self
                .channel_means
                .as_ref()
                .ok_or_else(|| Error::State("channel-mean extrapolation needs fitted channel means".into()))?;
            let mut s = series.clone();
            for t in last + 1..=horizon {
                s.timestamps.push(t);
                s.observations.push(means.clone());
            }
            extended = s;
            source = &extended;
        }
        let aug = augment_inputs(source, cfg.time_features, cfg.pe_tau, cfg.feature_dim)?;
        Ok(Prepared {
            times: aug.timestamps,
            inputs: aug.observations,
            horizon,
            seed: derive_seed(cfg.seed, &[hash_str(&series.id), salt]),
        })
    }

    /// Runs the encoder and head over a batch.
    pub fn forward(&self, params: &ParamStore, batch: &[&TimeSeries], opts: &ForwardOptions) -> Result<Forward> {
        let cfg = &self.config;
        let b = batch.len();
        if b == 0 {
            return Err(Error::EmptyInput("empty batch".into()));
        }
        let prepared = batch
            .iter()
            .map(|s| self.prepare(s, opts.horizon, opts.salt))
            .collect::<Result<Vec<_>>>()?;
        let hd = cfg.hidden_dim;
        let lstm = cfg.cell == CellKind::Lstm;
        let mut h = Matrix::zeros(b, hd);
        let mut c = lstm.then(|| Matrix::zeros(b, hd));
        for (r, p) in prepared.iter().enumerate() {
            let mut rng = rng_from(p.seed, &[]);
            h.row_mut(r).copy_from_slice(&init_hidden(hd, cfg.init_sigma, &mut rng)?);
            if let Some(c) = c.as_mut() {
                c.row_mut(r).copy_from_slice(&init_hidden(hd, cfg.init_sigma, &mut rng)?);
            }
        }

        let ode = self.dynamics.as_ref();
        let discrete = cfg.solve.gradient_mode == GradientMode::Discrete;
        let m = cfg.solve.steps_multiplier;
        let dt = 1.0 / m as f64;
        let t_end = prepared
            .iter()
            .map(|p| if ode.is_some() { p.horizon } else { *p.times.last().expect("nonempty") })
            .max()
            .expect("nonempty batch");
        let mut events = Vec::new();
        let mut trajectories = opts.record.then(|| vec![Vec::new(); b]);
        let mut cursor = vec![0usize; b];
        let (mut solver_steps, mut updates) = (0, 0);

        for t in 0..=t_end {
            if let (Some(net), true) = (ode, t > 0) {
                let rows: Vec<usize> = (0..b).filter(|&r| prepared[r].horizon >= t).collect();
                let all = rows.len() == b;
                for k in 0..m {
                    let tau = (t - 1) as f64 + k as f64 * dt;
                    let cur = if all { h.clone() } else { h.gather(&rows) };
                    let (next, cache) = euler_step(net, params, &cur, tau, dt)?;
                    if all {
                        h = next;
                    } else {
                        h.scatter(&rows, &next);
                    }
                    solver_steps += rows.len();
                    if opts.keep_tape {
                        events.push(Event::Solve {
                            rows: (!all).then(|| rows.clone()),
                            t: tau,
                            dt,
                            saved: discrete.then_some((cur, cache)),
                        });
                    }
                }
            }
            let active: Vec<usize> = (0..b)
                .filter(|&r| prepared[r].times.get(cursor[r]) == Some(&t))
                .collect();
            if active.is_empty() {
                continue;
            }
            let pre = h.gather(&active);
            let mode = if opts.mode == BnMode::Train && active.len() >= 2 {
                BnMode::Train
            } else {
                BnMode::Eval
            };
            let (normed, bn) = self.bn_update.forward(params, &pre, mode)?;
            let x = Matrix::from_rows(
                &active
                    .iter()
                    .map(|&r| prepared[r].inputs[cursor[r]].as_slice())
                    .collect::<Vec<_>>(),
            )?;
            let state = CellState {
                h: normed,
                c: c.as_ref().map(|c| c.gather(&active)),
            };
            let (out, cell_cache) = self.cell.forward(params, &x, &state)?;
            check_bounded(&out.h)?;
            h.scatter(&active, &out.h);
            if let (Some(c), Some(oc)) = (c.as_mut(), out.c.as_ref()) {
                c.scatter(&active, oc);
            }
            if let Some(tr) = trajectories.as_mut() {
                for (i, &r) in active.iter().enumerate() {
                    tr[r].push((t, out.h.row(i).to_vec()));
                }
            }
            for &r in &active {
                cursor[r] += 1;
            }
            updates += active.len();
            if opts.keep_tape {
                events.push(Event::Update {
                    rows: active,
                    pre,
                    bn,
                    cell: cell_cache,
                });
            }
        }

        let head_mode = if opts.mode == BnMode::Train && b >= 2 {
            BnMode::Train
        } else {
            BnMode::Eval
        };
        let (head_x, head_bn) = self.bn_head.forward(params, &h, head_mode)?;
        let logits = self.head.forward(params, &head_x)?;
        let probs = softmax_rows(&logits)?;
        Ok(Forward {
            logits,
            probs,
            final_state: h,
            trajectories,
            solver_steps,
            updates,
            tape: opts.keep_tape.then_some(Tape {
                events,
                head_bn,
                head_x,
            }),
        })
    }

    /// Back-propagates `dlogits` through a taped forward pass, accumulating
    /// into `params`' gradient buffers.
    pub fn backward(&self, params: &mut ParamStore, fwd: &Forward, dlogits: &Matrix) -> Result<()> {
        let tape = fwd
            .tape
            .as_ref()
            .ok_or_else(|| Error::State("backward needs a forward pass run with a tape".into()))?;
        if dlogits.rows() != fwd.logits.rows() || dlogits.cols() != fwd.logits.cols() {
            return Err(Error::dim("logit gradient shape differs from the logits"));
        }
        let b = fwd.final_state.rows();
        let hd = self.config.hidden_dim;
        let dz = self.head.backward(params, &tape.head_x, dlogits);
        let mut dh = self.bn_head.backward(params, &tape.head_bn, &dz);
        let mut dc = (self.config.cell == CellKind::Lstm).then(|| Matrix::zeros(b, hd));
        let mut recon = (self.config.solve.gradient_mode == GradientMode::Adjoint).then(|| fwd.final_state.clone());

        for event in tape.events.iter().rev() {
            match event {
                Event::Update { rows, pre, bn, cell } => {
                    let dh_out = dh.gather(rows);
                    let dc_out = dc.as_ref().map(|m| m.gather(rows));
                    let (_dx, dnormed, dc_prev) = self.cell.backward(params, cell, &dh_out, dc_out.as_ref());
                    let dpre = self.bn_update.backward(params, bn, &dnormed);
                    dh.scatter(rows, &dpre);
                    if let (Some(dc), Some(g)) = (dc.as_mut(), dc_prev.as_ref()) {
                        dc.scatter(rows, g);
                    }
                    if let Some(r) = recon.as_mut() {
                        r.scatter(rows, pre);
                    }
                }
                Event::Solve { rows, t, dt, saved } => {
                    let net = self
                        .dynamics
                        .as_ref()
                        .ok_or_else(|| Error::State("solve event without dynamics".into()))?;
                    let a = match rows {
                        Some(r) => dh.gather(r),
                        None => dh.clone(),
                    };
                    let a_prev = match saved {
                        Some((h_k, cache)) => discrete_step_backward(net, params, h_k, cache, &a, *dt),
                        None => {
                            let recon = recon
                                .as_mut()
                                .ok_or_else(|| Error::State("adjoint replay without a reconstructed state".into()))?;
                            let cur = match rows {
                                Some(r) => recon.gather(r),
                                None => recon.clone(),
                            };
                            let (h_prev, a_prev) = adjoint_step_backward(net, params, &cur, t + dt, &a, *dt)?;
                            match rows {
                                Some(r) => recon.scatter(r, &h_prev),
                                None => *recon = h_prev,
                            }
                            a_prev
                        }
                    };
                    match rows {
                        Some(r) => dh.scatter(r, &a_prev),
                        None => dh = a_prev,
                    }
                }
            }
        }
        Ok(())
    }

    /// Folds the batch statistics of a training forward pass into the
    /// running estimates. Pre-update statistics are pooled over all grid
    /// points of the batch.
    pub fn commit_stats(&mut self, fwd: &Forward) {
        let Some(tape) = fwd.tape.as_ref() else {
            return;
        };
        let per_step: Vec<&BatchStats> = tape
            .events
            .iter()
            .filter_map(|e| match e {
                Event::Update { bn, .. } => bn.stats.as_ref(),
                Event::Solve { .. } => None,
            })
            .collect();
        if let Some(pooled) = pool_stats(&per_step) {
            self.bn_update.commit(&pooled);
        }
        if let Some(s) = tape.head_bn.stats.as_ref() {
            self.bn_head.commit(s);
        }
    }

    /// Eval-mode head: batch norm with running statistics, affine, softmax.
    pub fn classify(&self, params: &ParamStore, h: &[f64]) -> Result<Vec<f64>> {
        if h.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("hidden state is not finite".into()));
        }
        let (x, _) = self.bn_head.forward(params, &Matrix::row_vector(h), BnMode::Eval)?;
        Ok(softmax_rows(&self.head.forward(params, &x)?)?.into_vec())
    }
}

/// Count-weighted mean and total population variance of several batches.
fn pool_stats(stats: &[&BatchStats]) -> Option<BatchStats> {
    let first = stats.first()?;
    let dim = first.mean.len();
    let n: usize = stats.iter().map(|s| s.count).sum();
    let nf = n as f64;
    let mut mean = vec![0.0; dim];
    for s in stats {
        for (m, v) in mean.iter_mut().zip(&s.mean) {
            *m += s.count as f64 * v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= nf);
    let mut var = vec![0.0; dim];
    for s in stats {
        for j in 0..dim {
            let d = s.mean[j] - mean[j];
            var[j] += s.count as f64 * (s.var[j] + d * d);
        }
    }
    var.iter_mut().for_each(|v| *v /= nf);
    Some(BatchStats { mean, var, count: n })
}

/// A trained or freshly initialized classifier.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceEncoder {
    pub net: Network,
    pub params: ParamStore,
}

impl SequenceEncoder {
    pub fn new(config: ModelConfig) -> Result<Self> {
        let (net, params) = Network::build(config)?;
        Ok(SequenceEncoder { net, params })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.net.config
    }

    /// Hidden state at `horizon` (eval mode).
    pub fn encode(&self, series: &TimeSeries, horizon: usize) -> Result<Vec<f64>> {
        let opts = ForwardOptions {
            horizon: Some(horizon),
            ..ForwardOptions::eval()
        };
        Ok(self.net.forward(&self.params, &[series], &opts)?.final_state.into_vec())
    }

    pub fn classify(&self, h: &[f64]) -> Result<Vec<f64>> {
        if h.len() != self.net.config.hidden_dim {
            return Err(Error::dim(format!(
                "classifier expects width {}, got {}",
                self.net.config.hidden_dim,
                h.len()
            )));
        }
        self.net.classify(&self.params, h)
    }

    /// Label and class probabilities at the series' own horizon.
    pub fn predict(&self, series: &TimeSeries) -> Result<(usize, Vec<f64>)> {
        let probs = self.classify(&self.encode(series, series.horizon)?)?;
        Ok((argmax(&probs), probs))
    }

    /// Eval-mode probabilities for many series, one row each.
    pub fn predict_batch(&self, series: &[&TimeSeries]) -> Result<Matrix> {
        Ok(self.net.forward(&self.params, series, &ForwardOptions::eval())?.probs)
    }
}

#[cfg(test)]
mod tests;
