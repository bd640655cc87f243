//! JSON-lines dataset files: one header object, then one object per series.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::series::{Dataset, TimeSeries};
use crate::error::{Error, Result};
use crate::fsutil::{read_to_string, write_atomic};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    version: u32,
    #[serde(rename = "K")]
    num_classes: usize,
    d: usize,
    #[serde(rename = "T")]
    nominal_length: usize,
    missing_rate: f64,
}

#[derive(Serialize)]
struct SeriesLineRef<'a> {
    id: &'a str,
    label: usize,
    timestamps: &'a [usize],
    observations: &'a [Vec<f64>],
    horizon: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SeriesLine {
    id: String,
    label: usize,
    timestamps: Vec<usize>,
    observations: Vec<Vec<f64>>,
    horizon: usize,
}

pub fn to_jsonl(ds: &Dataset) -> Result<String> {
    let header = Header {
        version: FORMAT_VERSION,
        num_classes: ds.num_classes,
        d: ds.feature_dim,
        nominal_length: ds.nominal_length,
        missing_rate: ds.missing_rate,
    };
    let mut out = serde_json::to_string(&header)?;
    out.push('\n');
    for s in &ds.series {
        out.push_str(&serde_json::to_string(&SeriesLineRef {
            id: &s.id,
            label: s.label,
            timestamps: &s.timestamps,
            observations: &s.observations,
            horizon: s.horizon,
        })?);
        out.push('\n');
    }
    Ok(out)
}

pub fn save_jsonl(ds: &Dataset, path: &Path) -> Result<()> {
    write_atomic(path, to_jsonl(ds)?.as_bytes())
}

pub fn from_jsonl(text: &str) -> Result<Dataset> {
    let mut lines = text.lines().enumerate();
    let header: Header = match lines.next() {
        Some((_, line)) => serde_json::from_str(line).map_err(|e| Error::Parse {
            line: 1,
            message: format!("bad header: {e}"),
        })?,
        None => {
            return Err(Error::Parse {
                line: 1,
                message: "missing header line".into(),
            })
        }
    };
    if header.version != FORMAT_VERSION {
        return Err(Error::Parse {
            line: 1,
            message: format!("unsupported format version {}", header.version),
        });
    }
    let mut series = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: SeriesLine = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: idx + 1,
            message: e.to_string(),
        })?;
        series.push(TimeSeries {
            id: parsed.id,
            label: parsed.label,
            timestamps: parsed.timestamps,
            observations: parsed.observations,
            horizon: parsed.horizon,
        });
    }
    let ds = Dataset {
        series,
        num_classes: header.num_classes,
        feature_dim: header.d,
        nominal_length: header.nominal_length,
        missing_rate: header.missing_rate,
    };
    ds.validate()?;
    Ok(ds)
}

pub fn load_jsonl(path: &Path) -> Result<Dataset> {
    from_jsonl(&read_to_string(path)?)
}
