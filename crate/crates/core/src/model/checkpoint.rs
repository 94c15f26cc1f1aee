//! Single JSON document holding the configuration, input shape, Fourier
//! frequencies, normalization and weights. Floats round-trip exactly.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::network::{InputShape, Network, Normalization, ParamLayout, TensorInfo};
use crate::error::{Error, Result};
use crate::motion::FrequencyBank;

pub const CHECKPOINT_FORMAT: &str = "travcost-model";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    format: String,
    version: u32,
    recurrent_cell: String,
    config: ModelConfig,
    input: InputShape,
    frequencies: FrequencyBank,
    normalization: Normalization,
    tensors: Vec<TensorInfo>,
    params: Vec<f64>,
}

impl Network {
    pub fn to_json(&self) -> Result<String> {
        let doc = Document {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            recurrent_cell: self.recurrent_cell().into(),
            config: self.config.clone(),
            input: self.input,
            frequencies: self.frequencies.clone(),
            normalization: self.normalization.clone(),
            tensors: self.layout.tensors.clone(),
            params: self.params.clone(),
        };
        Ok(serde_json::to_string(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Document = serde_json::from_str(text)?;
        if doc.format != CHECKPOINT_FORMAT || doc.version != CHECKPOINT_VERSION {
            return Err(Error::invalid(format!("unsupported checkpoint {} v{}", doc.format, doc.version)));
        }
        let layout = ParamLayout::new(&doc.config, &doc.input)?;
        if layout.tensors != doc.tensors || layout.len != doc.params.len() {
            return Err(Error::Shape("checkpoint tensors do not match its configuration".into()));
        }
        if !doc.params.iter().all(|p| p.is_finite()) {
            return Err(Error::NonFinite("checkpoint weights"));
        }
        let mut net = Network::new(doc.config, doc.input, doc.frequencies, doc.normalization)?;
        if net.recurrent_cell() != doc.recurrent_cell {
            return Err(Error::invalid(format!("checkpoint declares a {} cell", doc.recurrent_cell)));
        }
        net.params = doc.params;
        Ok(net)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| Error::Parse { path: path.to_path_buf(), message: e.to_string() })
    }

    /// Refuses inputs encoded with different Fourier frequencies.
    pub fn check_frequencies(&self, other: &FrequencyBank) -> Result<()> {
        if self.frequencies.same_as(other) {
            Ok(())
        } else {
            Err(Error::FrequencyMismatch)
        }
    }
}
