use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, TimeSeries};
use crate::error::{Error, Result};
use crate::eval::run_eval;
use crate::model::{ForwardOptions, ModelConfig, SequenceEncoder};
use crate::rng::{hash_str, rng_from};
use crate::train::loss::batch_cross_entropy;
use crate::train::optim::{lr_schedule, Adamax, AdamaxConfig};
use crate::train::regularize::subsample;

const SHUFFLE_STREAM: u64 = 0x5_11FF;
const SUBSAMPLE_STREAM: u64 = 0x5_AB5A;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub lr0: f64,
    /// Per-batch multiplicative learning-rate decay.
    pub decay: f64,
    /// `None` picks 500 for ODE models and 300 otherwise.
    pub batch_size: Option<usize>,
    pub epochs: usize,
    pub max_batches: Option<usize>,
    pub keep_prob: f64,
    /// `false` skips the subsampling code path entirely.
    pub regularize: bool,
    pub adamax: AdamaxConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr0: 0.07,
            decay: 0.9995,
            batch_size: None,
            epochs: 12,
            max_batches: None,
            keep_prob: 0.75,
            regularize: true,
            adamax: AdamaxConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.lr0 >= 0.0) || !self.lr0.is_finite() {
            return bad(format!("lr0 {} must be finite and nonnegative", self.lr0));
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return bad(format!("decay {} outside (0, 1]", self.decay));
        }
        if !(self.keep_prob > 0.0 && self.keep_prob <= 1.0) {
            return bad(format!("keep probability {} outside (0, 1]", self.keep_prob));
        }
        if self.batch_size == Some(0) {
            return bad("batch size must be positive".into());
        }
        if self.epochs == 0 {
            return bad("epochs must be positive".into());
        }
        let a = self.adamax;
        if !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) || !(a.eps > 0.0) {
            return bad(format!("invalid Adamax constants {a:?}"));
        }
        Ok(())
    }

    pub fn effective_batch_size(&self, model: &ModelConfig) -> usize {
        self.batch_size
            .unwrap_or(if model.ode_enabled { 500 } else { 300 })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchRecord {
    pub epoch: usize,
    pub batch: usize,
    pub lr: f64,
    pub loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub batches: usize,
    pub train_loss: f64,
    pub val_accuracy: Option<f64>,
    pub val_macro_f1: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub batches: Vec<BatchRecord>,
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose weights were kept.
    pub best_epoch: Option<usize>,
    pub best_val_macro_f1: Option<f64>,
}

impl History {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,batch,lr,loss\n");
        for b in &self.batches {
            out.push_str(&format!("{},{},{},{}\n", b.epoch, b.batch, b.lr, b.loss));
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Summary<'a> {
            n_batches: usize,
            final_loss: Option<f64>,
            best_epoch: Option<usize>,
            best_val_macro_f1: Option<f64>,
            epochs: &'a [EpochRecord],
        }
        Ok(serde_json::to_string_pretty(&Summary {
            n_batches: self.batches.len(),
            final_loss: self.batches.last().map(|b| b.loss),
            best_epoch: self.best_epoch,
            best_val_macro_f1: self.best_val_macro_f1,
            epochs: &self.epochs,
        })? + "\n")
    }
}

pub struct FitOutput {
    pub encoder: SequenceEncoder,
    pub history: History,
}

/// Channel-wise means over every observation in `ds`.
pub fn channel_means(ds: &Dataset) -> Vec<f64> {
    let mut sum = vec![0.0; ds.feature_dim];
    let mut n = 0usize;
    for s in &ds.series {
        for obs in &s.observations {
            for (a, v) in sum.iter_mut().zip(obs) {
                *a += v;
            }
            n += 1;
        }
    }
    if n > 0 {
        sum.iter_mut().for_each(|a| *a /= n as f64);
    }
    sum
}

fn check_dims(ds: &Dataset, cfg: &ModelConfig, what: &str) -> Result<()> {
    if ds.feature_dim != cfg.feature_dim || ds.num_classes != cfg.num_classes {
        return Err(Error::dim(format!(
            "{what} set has d={} K={}, model has d={} K={}",
            ds.feature_dim, ds.num_classes, cfg.feature_dim, cfg.num_classes
        )));
    }
    Ok(())
}

pub fn fit(train: &Dataset, val: Option<&Dataset>, mcfg: &ModelConfig, tcfg: &TrainConfig) -> Result<FitOutput> {
    fit_with_progress(train, val, mcfg, tcfg, &mut |_| {})
}

/// Mini-batch training with Adamax and the decaying learning rate. Keeps
/// the weights of the epoch with the best validation macro-F1 (the last
/// epoch without a validation set).
pub fn fit_with_progress(
    train: &Dataset,
    val: Option<&Dataset>,
    mcfg: &ModelConfig,
    tcfg: &TrainConfig,
    on_epoch: &mut dyn FnMut(&EpochRecord),
) -> Result<FitOutput> {
    tcfg.validate()?;
    mcfg.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyInput("training set is empty".into()));
    }
    check_dims(train, mcfg, "training")?;
    if let Some(v) = val {
        check_dims(v, mcfg, "validation")?;
    }
    for s in &train.series {
        s.validate(Some(train.feature_dim), Some(train.num_classes))?;
    }

    let mut enc = SequenceEncoder::new(mcfg.clone())?;
    enc.net.channel_means = Some(channel_means(train));
    let mut opt = Adamax::new(&enc.params, tcfg.adamax);
    let batch_size = tcfg.effective_batch_size(mcfg);
    let mut history = History::default();
    let mut best: Option<(f64, SequenceEncoder)> = None;
    let mut k = 0usize;

    'epochs: for epoch in 0..tcfg.epochs {
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut rng_from(tcfg.seed, &[SHUFFLE_STREAM, epoch as u64]));
        let mut losses = Vec::new();
        for chunk in order.chunks(batch_size) {
            if tcfg.max_batches.is_some_and(|m| k >= m) {
                break;
            }
            let batch: Vec<TimeSeries> = if tcfg.regularize {
                chunk
                    .iter()
                    .map(|&i| {
                        let s = &train.series[i];
                        let mut rng = rng_from(tcfg.seed, &[SUBSAMPLE_STREAM, k as u64, hash_str(&s.id)]);
                        subsample(s, tcfg.keep_prob, &mut rng)
                    })
                    .collect::<Result<_>>()?
            } else {
                chunk.iter().map(|&i| train.series[i].clone()).collect()
            };
            let loss = train_step(&mut enc, &mut opt, &batch, k, tcfg)?;
            let lr = lr_schedule(k as u64, tcfg.lr0, tcfg.decay);
            history.batches.push(BatchRecord {
                epoch,
                batch: k,
                lr,
                loss,
            });
            losses.push(loss);
            k += 1;
        }
        if losses.is_empty() {
            break 'epochs;
        }
        let mut record = EpochRecord {
            epoch,
            batches: losses.len(),
            train_loss: losses.iter().sum::<f64>() / losses.len() as f64,
            val_accuracy: None,
            val_macro_f1: None,
        };
        match val.filter(|v| !v.is_empty()) {
            Some(v) => {
                let m = run_eval(&enc, v)?;
                record.val_accuracy = Some(m.accuracy);
                record.val_macro_f1 = Some(m.macro_f1);
                if best.as_ref().is_none_or(|(f1, _)| m.macro_f1 > *f1) {
                    best = Some((m.macro_f1, enc.clone()));
                    history.best_epoch = Some(epoch);
                    history.best_val_macro_f1 = Some(m.macro_f1);
                }
            }
            None => history.best_epoch = Some(epoch),
        }
        on_epoch(&record);
        history.epochs.push(record);
    }

    let mut encoder = best.map(|(_, e)| e).unwrap_or(enc);
    encoder.params.zero_grads();
    Ok(FitOutput { encoder, history })
}

/// One forward/backward/update on `batch`; returns the mean loss.
pub fn train_step(
    enc: &mut SequenceEncoder,
    opt: &mut Adamax,
    batch: &[TimeSeries],
    k: usize,
    tcfg: &TrainConfig,
) -> Result<f64> {
    let diverged = |loss: f64| Error::TrainingDiverged { batch: k, loss };
    let refs: Vec<&TimeSeries> = batch.iter().collect();
    let labels: Vec<usize> = batch.iter().map(|s| s.label).collect();
    let fwd = match enc.net.forward(&enc.params, &refs, &ForwardOptions::train(k as u64 + 1)) {
        Err(Error::Divergence { .. }) => return Err(diverged(f64::NAN)),
        other => other?,
    };
    let (loss, dlogits) = batch_cross_entropy(&fwd.probs, &labels)?;
    if !loss.is_finite() {
        return Err(diverged(loss));
    }
    enc.params.zero_grads();
    match enc.net.backward(&mut enc.params, &fwd, &dlogits) {
        Err(Error::Divergence { .. }) => return Err(diverged(loss)),
        other => other?,
    }
    let lr = lr_schedule(k as u64, tcfg.lr0, tcfg.decay);
    match opt.step(&mut enc.params, lr) {
        Err(Error::Numeric(_)) => return Err(diverged(loss)),
        other => other?,
    }
    enc.net.commit_stats(&fwd);
    Ok(loss)
}
