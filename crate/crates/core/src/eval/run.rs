use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, TimeSeries};
use crate::error::{Error, Result};
use crate::eval::metrics::{accuracy, confusion, macro_f1, ConfusionMatrix};
use crate::fsutil::write_atomic;
use crate::model::{argmax, SequenceEncoder};

/// Series evaluated per forward pass.
pub const EVAL_CHUNK: usize = 256;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub n: usize,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub confusion: ConfusionMatrix,
}

/// Eval-mode predictions at each series' own horizon, in input order.
pub fn predict_all(enc: &SequenceEncoder, series: &[TimeSeries]) -> Result<Vec<usize>> {
    let chunks: Vec<Vec<usize>> = series
        .par_chunks(EVAL_CHUNK)
        .map(|chunk| {
            let refs: Vec<&TimeSeries> = chunk.iter().collect();
            let probs = enc.predict_batch(&refs)?;
            Ok((0..probs.rows()).map(|r| argmax(probs.row(r))).collect())
        })
        .collect::<Result<_>>()?;
    Ok(chunks.into_iter().flatten().collect())
}

/// Full-sequence evaluation of `enc` on `test`.
pub fn run_eval(enc: &SequenceEncoder, test: &Dataset) -> Result<Metrics> {
    let cfg = enc.config();
    if test.feature_dim != cfg.feature_dim {
        return Err(Error::dim(format!(
            "model expects {} features, dataset has {}",
            cfg.feature_dim, test.feature_dim
        )));
    }
    if test.num_classes != cfg.num_classes {
        return Err(Error::dim(format!(
            "model has {} classes, dataset has {}",
            cfg.num_classes, test.num_classes
        )));
    }
    if test.is_empty() {
        return Err(Error::EmptyInput("evaluation set is empty".into()));
    }
    let preds = predict_all(enc, &test.series)?;
    let cm = confusion(&preds, &test.labels(), cfg.num_classes)?;
    Ok(Metrics {
        n: preds.len(),
        accuracy: accuracy(&cm)?,
        macro_f1: macro_f1(&cm)?,
        confusion: cm,
    })
}

pub fn metrics_json(m: &Metrics) -> Result<String> {
    Ok(serde_json::to_string_pretty(m)? + "\n")
}

pub fn metrics_csv(m: &Metrics) -> String {
    format!("metric,value\nn,{}\naccuracy,{}\nmacro_f1,{}\n", m.n, m.accuracy, m.macro_f1)
}

/// `true\pred` header row, then one row per true class.
pub fn confusion_csv(cm: &ConfusionMatrix) -> String {
    let k = cm.num_classes();
    let mut out = String::from("true\\pred");
    for c in 0..k {
        out.push_str(&format!(",{c}"));
    }
    out.push('\n');
    for (r, row) in cm.counts.iter().enumerate() {
        out.push_str(&r.to_string());
        for v in row {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

pub fn parse_confusion_csv(text: &str) -> Result<ConfusionMatrix> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let mut counts = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            line: i + 2,
            message: e.to_string(),
        })?;
        let row = rec
            .iter()
            .skip(1)
            .map(|v| v.trim().parse::<u64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse {
                line: i + 2,
                message: e.to_string(),
            })?;
        counts.push(row);
    }
    let k = counts.len();
    if k == 0 || counts.iter().any(|r| r.len() != k) {
        return Err(Error::Validation("confusion matrix CSV is not square".into()));
    }
    Ok(ConfusionMatrix { counts })
}

/// Writes `<stem>.json`, `<stem>.csv` and `<stem>_cm.csv`.
pub fn write_metrics(dir_stem: &Path, m: &Metrics) -> Result<()> {
    let with = |suffix: &str| {
        let mut s = dir_stem.as_os_str().to_owned();
        s.push(suffix);
        std::path::PathBuf::from(s)
    };
    write_atomic(&with(".json"), metrics_json(m)?.as_bytes())?;
    write_atomic(&with(".csv"), metrics_csv(m).as_bytes())?;
    write_atomic(&with("_cm.csv"), confusion_csv(&m.confusion).as_bytes())
}
