//! JSON checkpoints. Parameter data is stored as base64 of little-endian
//! f64 bytes so a reload is bit-exact.

use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::transformer::ForecastModel;
use crate::data::DatasetManifest;
use crate::error::{contract, Error, Result};
use crate::numerics::Matrix;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredParam {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub byte_order: String,
    pub config: ModelConfig,
    /// Encoding used at training time (layout, normalization, windows).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<DatasetManifest>,
    pub params: Vec<StoredParam>,
}

impl Checkpoint {
    pub fn from_model(model: &ForecastModel, dataset: Option<DatasetManifest>) -> Self {
        let params = model
            .specs()
            .iter()
            .zip(model.params())
            .map(|(s, p)| StoredParam {
                name: s.name.clone(),
                rows: p.rows(),
                cols: p.cols(),
                data: STANDARD.encode(p.data().iter().flat_map(|v| v.to_le_bytes()).collect::<Vec<u8>>()),
            })
            .collect();
        Self {
            format_version: CHECKPOINT_VERSION,
            byte_order: "little".into(),
            config: model.config().clone(),
            dataset,
            params,
        }
    }

    pub fn to_model(&self) -> Result<ForecastModel> {
        if self.format_version != CHECKPOINT_VERSION {
            return Err(Error::Config(format!("unsupported checkpoint version {}", self.format_version)));
        }
        if self.byte_order != "little" {
            return Err(Error::Config(format!("unsupported byte order {:?}", self.byte_order)));
        }
        let mut mats = Vec::with_capacity(self.params.len());
        for p in &self.params {
            let bytes = STANDARD
                .decode(&p.data)
                .map_err(|e| contract(format!("parameter {}: {e}", p.name)))?;
            if bytes.len() != p.rows * p.cols * 8 {
                return Err(contract(format!("parameter {} has {} bytes", p.name, bytes.len())));
            }
            let data = bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            mats.push(Matrix::from_vec(p.rows, p.cols, data)?);
        }
        let model = ForecastModel::from_parts(self.config.clone(), mats)?;
        for (s, p) in model.specs().iter().zip(&self.params) {
            if s.name != p.name {
                return Err(contract(format!("parameter {} found where {} was expected", p.name, s.name)));
            }
        }
        Ok(model)
    }
}

pub fn save_checkpoint(path: &Path, model: &ForecastModel, dataset: Option<DatasetManifest>) -> Result<()> {
    let ck = Checkpoint::from_model(model, dataset);
    crate::io::write_json(path, &ck)
}

pub fn load_checkpoint(path: &Path) -> Result<(ForecastModel, Option<DatasetManifest>)> {
    let ck: Checkpoint = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    Ok((ck.to_model()?, ck.dataset))
}
