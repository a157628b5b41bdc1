//! Versioned JSON model files. `W` is never stored: loading re-derives it
//! from the stored recipe, so the file cannot disagree with the fields.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::readout::Readout;
use crate::reservoir::{ReservoirModel, ReservoirParams, WeightSource};

pub const FORMAT_VERSION: u32 = 1;

/// Where a model came from.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Provenance {
    /// Hex digest of the resolved configuration that produced the model.
    pub config_hash: String,
    pub tool_version: String,
    /// Named seeds used to build and train the model.
    pub seeds: BTreeMap<String, u64>,
    pub epochs_trained: usize,
    pub loss_curve: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format_version: u32,
    pub spec: GridSpec,
    pub params: ReservoirParams,
    pub input_seed: u64,
    pub w_in: Vec<f64>,
    pub source: WeightSource,
    pub readout: Readout,
    pub horizon_steps: usize,
    pub provenance: Provenance,
}

impl ModelFile {
    pub fn new(
        model: &ReservoirModel,
        readout: &Readout,
        horizon_steps: usize,
        provenance: Provenance,
    ) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            spec: model.spec.clone(),
            params: model.params,
            input_seed: model.input_seed,
            w_in: model.w_in.clone(),
            source: model.source.clone(),
            readout: readout.clone(),
            horizon_steps,
            provenance,
        }
    }

    /// Rebuilds the reservoir (including `W`) and returns it with the readout.
    pub fn to_model(&self) -> Result<(ReservoirModel, Readout)> {
        let model = ReservoirModel::from_parts(
            self.spec.clone(),
            self.params,
            self.input_seed,
            self.w_in.clone(),
            self.source.clone(),
        )?;
        self.readout.validate()?;
        if self.readout.dim() != model.p_dim() {
            return Err(Error::Format(format!(
                "readout has {} weights for {} p-neurons",
                self.readout.dim(),
                model.p_dim()
            )));
        }
        Ok((model, self.readout.clone()))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        let version = raw.get("format_version").and_then(|v| v.as_u64());
        if version != Some(FORMAT_VERSION as u64) {
            return Err(Error::Format(format!(
                "unsupported model format version {version:?}, expected {FORMAT_VERSION}"
            )));
        }
        serde_json::from_value(raw).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
