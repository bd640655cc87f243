//! Experiment sweeps: early classification, sparsity, training-set size and
//! keep probability, each repeated over seeds.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{sparsify, subset, truncate_leading, Dataset};
use crate::error::{Error, Result};
use crate::eval::run::run_eval;
use crate::model::{ModelConfig, SequenceEncoder};
use crate::rng::{hash_str, rng_from};
use crate::train::{fit, TrainConfig};

const SPARSIFY_STREAM: u64 = 0x5BA2;
const SUBSET_STREAM: u64 = 0xDA7A;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    Early,
    Sparsity,
    Datasize,
    Keepprob,
}

impl SweepKind {
    /// The grid used when none is given.
    pub fn default_grid(self) -> Vec<f64> {
        match self {
            SweepKind::Early => vec![1.0, 0.75, 0.5],
            SweepKind::Sparsity => vec![1.0, 0.75, 0.5, 0.25],
            SweepKind::Datasize => vec![1.0, 0.1, 0.01],
            SweepKind::Keepprob => vec![0.5, 0.65, 0.75, 0.9, 1.0],
        }
    }
}

impl FromStr for SweepKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "early" => Ok(SweepKind::Early),
            "sparsity" => Ok(SweepKind::Sparsity),
            "datasize" => Ok(SweepKind::Datasize),
            "keepprob" => Ok(SweepKind::Keepprob),
            other => Err(Error::Config(format!("unknown sweep kind {other:?}"))),
        }
    }
}

impl fmt::Display for SweepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepKind::Early => "early",
            SweepKind::Sparsity => "sparsity",
            SweepKind::Datasize => "datasize",
            SweepKind::Keepprob => "keepprob",
        })
    }
}

pub struct SweepData {
    pub train: Dataset,
    pub val: Option<Dataset>,
    pub test: Dataset,
}

#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub kind: SweepKind,
    /// `(name, config)`; the first model is the reference of the
    /// difference rows.
    pub models: Vec<(String, ModelConfig)>,
    pub grid: Vec<f64>,
    pub seeds: Vec<u64>,
    pub train: TrainConfig,
    /// Worker threads; 0 lets the pool decide.
    pub jobs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub model: String,
    pub condition: f64,
    pub seed: u64,
    pub accuracy: f64,
    pub macro_f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub model: String,
    pub condition: f64,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub n_seeds: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub kind: SweepKind,
    pub grid: Vec<f64>,
    pub models: Vec<String>,
    pub seeds: Vec<u64>,
    pub runs: Vec<RunRow>,
    /// Paired per-seed differences `first model − other model`.
    pub differences: Vec<RunRow>,
    pub summary: Vec<SummaryRow>,
}

pub fn validate_grid(kind: SweepKind, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Config(format!("{kind} sweep needs a nonempty grid")));
    }
    if let Some(v) = grid.iter().find(|v| !(**v > 0.0 && **v <= 1.0)) {
        return Err(Error::Config(format!("{kind} grid value {v} outside (0, 1]")));
    }
    Ok(())
}

/// Model and training configs with both seeds set to `seed`.
pub fn seeded(mcfg: &ModelConfig, tcfg: &TrainConfig, seed: u64) -> (ModelConfig, TrainConfig) {
    (
        ModelConfig {
            seed,
            ..mcfg.clone()
        },
        TrainConfig {
            seed,
            ..tcfg.clone()
        },
    )
}

/// Keeps `round(fraction·n)` observations of every series; the choice for a
/// series depends only on `(seed, fraction, id)`.
pub fn sparsify_dataset(ds: &Dataset, fraction: f64, seed: u64) -> Result<Dataset> {
    let series = ds
        .series
        .iter()
        .map(|s| {
            let mut rng = rng_from(seed, &[SPARSIFY_STREAM, fraction.to_bits(), hash_str(&s.id)]);
            sparsify(s, fraction, &mut rng)
        })
        .collect::<Result<_>>()?;
    Ok(ds.with_series(series))
}

pub fn subset_dataset(ds: &Dataset, fraction: f64, seed: u64) -> Result<Dataset> {
    subset(ds, fraction, &mut rng_from(seed, &[SUBSET_STREAM, fraction.to_bits()]))
}

/// Truncates every test series to the leading `fraction` of the season.
/// Series left without observations are dropped.
pub fn early_test_set(test: &Dataset, fraction: f64) -> Result<Dataset> {
    let mut kept = Vec::with_capacity(test.len());
    for s in &test.series {
        match truncate_leading(s, fraction, test.nominal_length) {
            Ok(t) => kept.push(t),
            Err(Error::EmptyResult(_)) => {}
            Err(e) => return Err(e),
        }
    }
    if kept.is_empty() {
        return Err(Error::EmptyResult(format!("no test series has observations before {fraction}")));
    }
    Ok(test.with_series(kept))
}

pub fn train_model(mcfg: &ModelConfig, tcfg: &TrainConfig, seed: u64, train: &Dataset, val: Option<&Dataset>) -> Result<SequenceEncoder> {
    let (m, t) = seeded(mcfg, tcfg, seed);
    Ok(fit(train, val, &m, &t)?.encoder)
}

fn run_row(model: &str, condition: f64, seed: u64, m: &crate::eval::run::Metrics) -> RunRow {
    RunRow {
        model: model.to_string(),
        condition,
        seed,
        accuracy: m.accuracy,
        macro_f1: m.macro_f1,
    }
}

/// One unit of independent work: a model and seed, plus the grid value for
/// kinds that retrain per condition.
fn run_cell(spec: &SweepSpec, data: &SweepData, model: usize, condition: Option<f64>, seed: u64) -> Result<Vec<RunRow>> {
    let (name, mcfg) = &spec.models[model];
    let val = data.val.as_ref();
    match (spec.kind, condition) {
        (SweepKind::Early, None) => {
            let enc = train_model(mcfg, &spec.train, seed, &data.train, val)?;
            spec.grid
                .iter()
                .map(|&f| Ok(run_row(name, f, seed, &run_eval(&enc, &early_test_set(&data.test, f)?)?)))
                .collect()
        }
        (SweepKind::Sparsity, Some(f)) => {
            let train = sparsify_dataset(&data.train, f, seed)?;
            let val = val.map(|v| sparsify_dataset(v, f, seed)).transpose()?;
            let test = sparsify_dataset(&data.test, f, seed)?;
            let enc = train_model(mcfg, &spec.train, seed, &train, val.as_ref())?;
            Ok(vec![run_row(name, f, seed, &run_eval(&enc, &test)?)])
        }
        (SweepKind::Datasize, Some(f)) => {
            let train = subset_dataset(&data.train, f, seed)?;
            let enc = train_model(mcfg, &spec.train, seed, &train, val)?;
            Ok(vec![run_row(name, f, seed, &run_eval(&enc, &data.test)?)])
        }
        (SweepKind::Keepprob, Some(p)) => {
            let tcfg = TrainConfig {
                keep_prob: p,
                ..spec.train.clone()
            };
            let enc = train_model(mcfg, &tcfg, seed, &data.train, val)?;
            Ok(vec![run_row(name, p, seed, &run_eval(&enc, &data.test)?)])
        }
        _ => unreachable!("cell layout matches the sweep kind"),
    }
}

pub fn sweep(spec: &SweepSpec, data: &SweepData) -> Result<SweepReport> {
    validate_grid(spec.kind, &spec.grid)?;
    if spec.seeds.is_empty() {
        return Err(Error::Config("sweep needs at least one seed".into()));
    }
    if spec.models.is_empty() {
        return Err(Error::Config("sweep needs at least one model".into()));
    }
    spec.train.validate()?;
    let mut cells = Vec::new();
    for m in 0..spec.models.len() {
        match spec.kind {
            SweepKind::Early => cells.extend(spec.seeds.iter().map(|&s| (m, None, s))),
            _ => {
                for &f in &spec.grid {
                    cells.extend(spec.seeds.iter().map(|&s| (m, Some(f), s)));
                }
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {} worker(s): {e}", spec.jobs)))?;
    let results: Vec<Vec<RunRow>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(m, f, s)| run_cell(spec, data, m, f, s))
            .collect::<Result<_>>()
    })?;
    let runs = results.into_iter().flatten().collect();
    let names = spec.models.iter().map(|(n, _)| n.clone()).collect();
    Ok(SweepReport::assemble(spec.kind, spec.grid.clone(), names, spec.seeds.clone(), runs))
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl SweepReport {
    /// Orders runs by (model, condition, seed) and derives the difference
    /// rows and the summary.
    pub fn assemble(kind: SweepKind, grid: Vec<f64>, models: Vec<String>, seeds: Vec<u64>, runs: Vec<RunRow>) -> SweepReport {
        let find = |model: &str, c: f64, s: u64| {
            runs.iter()
                .find(|r| r.model == model && r.condition.to_bits() == c.to_bits() && r.seed == s)
        };
        let mut ordered = Vec::new();
        for m in &models {
            for &c in &grid {
                for &s in &seeds {
                    if let Some(r) = find(m, c, s) {
                        ordered.push(r.clone());
                    }
                }
            }
        }
        let mut differences = Vec::new();
        if let Some(reference) = models.first() {
            for other in models.iter().skip(1) {
                for &c in &grid {
                    for &s in &seeds {
                        if let (Some(a), Some(b)) = (find(reference, c, s), find(other, c, s)) {
                            differences.push(RunRow {
                                model: format!("{reference} - {other}"),
                                condition: c,
                                seed: s,
                                accuracy: a.accuracy - b.accuracy,
                                macro_f1: a.macro_f1 - b.macro_f1,
                            });
                        }
                    }
                }
            }
        }
        let mut summary = Vec::new();
        let mut labels: Vec<String> = models.clone();
        for d in &differences {
            if !labels.contains(&d.model) {
                labels.push(d.model.clone());
            }
        }
        for label in &labels {
            for &c in &grid {
                let rows: Vec<&RunRow> = ordered
                    .iter()
                    .chain(&differences)
                    .filter(|r| &r.model == label && r.condition.to_bits() == c.to_bits())
                    .collect();
                if rows.is_empty() {
                    continue;
                }
                for (metric, pick) in [("accuracy", 0), ("macro_f1", 1)] {
                    let vals: Vec<f64> = rows
                        .iter()
                        .map(|r| if pick == 0 { r.accuracy } else { r.macro_f1 })
                        .collect();
                    let (mean, std) = mean_std(&vals);
                    summary.push(SummaryRow {
                        model: label.clone(),
                        condition: c,
                        metric: metric.to_string(),
                        mean,
                        std,
                        n_seeds: vals.len(),
                    });
                }
            }
        }
        SweepReport {
            kind,
            grid,
            models,
            seeds,
            runs: ordered,
            differences,
            summary,
        }
    }

    /// Mean of `metric` for `model` at `condition`.
    pub fn mean(&self, model: &str, condition: f64, metric: &str) -> Option<f64> {
        self.summary
            .iter()
            .find(|r| r.model == model && r.condition.to_bits() == condition.to_bits() && r.metric == metric)
            .map(|r| r.mean)
    }

    /// Per-seed rows, then the difference rows.
    pub fn runs_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["row", "model", "condition", "seed", "accuracy", "macro_f1"])
            .map_err(csv_err)?;
        for (kind, rows) in [("run", &self.runs), ("difference", &self.differences)] {
            for r in rows {
                w.write_record([
                    kind.to_string(),
                    r.model.clone(),
                    r.condition.to_string(),
                    r.seed.to_string(),
                    r.accuracy.to_string(),
                    r.macro_f1.to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
        finish(w)
    }

    pub fn summary_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["model", "condition", "metric", "mean", "std", "n_seeds"])
            .map_err(csv_err)?;
        for r in &self.summary {
            w.write_record([
                r.model.clone(),
                r.condition.to_string(),
                r.metric.clone(),
                r.mean.to_string(),
                r.std.to_string(),
                r.n_seeds.to_string(),
            ])
            .map_err(csv_err)?;
        }
        finish(w)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Input(format!("csv: {e}"))
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Input(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Input(e.to_string()))
}
