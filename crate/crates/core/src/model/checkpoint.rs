//! JSON checkpoint container.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil::{read_to_string, write_atomic};
use crate::model::config::ModelConfig;
use crate::model::encoder::{Network, SequenceEncoder};
use crate::tensorcore::RunningStats;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub version: u32,
    pub config: ModelConfig,
    pub params: Vec<ParamEntry>,
    pub bn_update: RunningStats,
    pub bn_head: RunningStats,
    pub channel_means: Option<Vec<f64>>,
    /// Free-form provenance such as the data split seed.
    #[serde(default)]
    pub metadata: BTreeMap<String, serde_json::Value>,
}

impl Checkpoint {
    pub fn from_encoder(enc: &SequenceEncoder, metadata: BTreeMap<String, serde_json::Value>) -> Self {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            config: enc.net.config.clone(),
            params: enc
                .params
                .iter()
                .map(|p| ParamEntry {
                    name: p.name.clone(),
                    shape: p.shape.clone(),
                    values: p.value.clone(),
                })
                .collect(),
            bn_update: enc.net.bn_update.running.clone(),
            bn_head: enc.net.bn_head.running.clone(),
            channel_means: enc.net.channel_means.clone(),
            metadata,
        }
    }

    /// Rebuilds the architecture from the config and installs the stored
    /// values; every parameter must be present with its registered shape.
    pub fn into_encoder(self) -> Result<SequenceEncoder> {
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::Validation(format!(
                "checkpoint version {} is not supported (expected {CHECKPOINT_VERSION})",
                self.version
            )));
        }
        let (mut net, mut params): (Network, _) = Network::build(self.config)?;
        if self.params.len() != params.len() {
            return Err(Error::Validation(format!(
                "checkpoint holds {} parameters, the model has {}",
                self.params.len(),
                params.len()
            )));
        }
        for entry in self.params {
            let p = params
                .by_name_mut(&entry.name)
                .ok_or_else(|| Error::Validation(format!("unknown parameter {:?}", entry.name)))?;
            if p.shape != entry.shape || p.value.len() != entry.values.len() {
                return Err(Error::Validation(format!(
                    "parameter {:?} has shape {:?}, checkpoint says {:?}",
                    entry.name, p.shape, entry.shape
                )));
            }
            if entry.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Validation(format!("parameter {:?} is not finite", entry.name)));
            }
            p.value = entry.values;
        }
        let h = net.config.hidden_dim;
        for (bn, stats) in [(&mut net.bn_update, self.bn_update), (&mut net.bn_head, self.bn_head)] {
            if stats.mean.len() != h || stats.var.len() != h || stats.var.iter().any(|v| !(*v >= 0.0)) {
                return Err(Error::Validation("batch-norm running statistics are malformed".into()));
            }
            bn.running = stats;
        }
        if let Some(m) = &self.channel_means {
            if m.len() != net.config.feature_dim {
                return Err(Error::Validation("channel means have the wrong width".into()));
            }
        }
        net.channel_means = self.channel_means;
        Ok(SequenceEncoder { net, params })
    }
}

pub fn save_checkpoint(
    path: &Path,
    enc: &SequenceEncoder,
    metadata: BTreeMap<String, serde_json::Value>,
) -> Result<()> {
    let mut bytes = serde_json::to_vec(&Checkpoint::from_encoder(enc, metadata))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn load_checkpoint(path: &Path) -> Result<(SequenceEncoder, BTreeMap<String, serde_json::Value>)> {
    let ck: Checkpoint = serde_json::from_str(&read_to_string(path)?)?;
    let meta = ck.metadata.clone();
    Ok((ck.into_encoder()?, meta))
}
