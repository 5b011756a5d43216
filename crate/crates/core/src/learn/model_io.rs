//! JSON model files. Floats are written in shortest round-trip form, so a
//! save/load cycle reproduces every matrix entry exactly.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ControllerModel, DofOperators, Operator};
use crate::decode::DecodeConfig;
use crate::encode::QuantumState;
use crate::error::{Error, Result};
use crate::types::Dof;

pub const MODEL_FORMAT: &str = "myoquant-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    n_channels: usize,
    decode_config: DecodeConfig,
    dofs: Vec<DofRecord>,
}

#[derive(Serialize, Deserialize)]
struct DofRecord {
    dof: Dof,
    prototype_pos: Vec<f64>,
    prototype_neg: Vec<f64>,
    p_pos: Vec<Vec<f64>>,
    p_neg: Vec<Vec<f64>>,
    p_zero: Vec<Vec<f64>>,
    theta_pos_max: f64,
    theta_neg_max: f64,
    overlap: f64,
}

impl ControllerModel {
    pub fn to_json(&self) -> String {
        let file = ModelFile {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            n_channels: self.n_channels,
            decode_config: self.decode_config.clone(),
            dofs: self
                .dofs
                .iter()
                .map(|(dof, ops)| DofRecord {
                    dof: *dof,
                    prototype_pos: ops.proto_pos.amplitudes().to_vec(),
                    prototype_neg: ops.proto_neg.amplitudes().to_vec(),
                    p_pos: ops.p_pos.rows(),
                    p_neg: ops.p_neg.rows(),
                    p_zero: ops.p_zero.rows(),
                    theta_pos_max: ops.theta_pos_max,
                    theta_neg_max: ops.theta_neg_max,
                    overlap: ops.overlap,
                })
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::ModelFormat(e.to_string()))?;
        if file.format != MODEL_FORMAT {
            return Err(Error::ModelFormat(format!("unexpected format tag {:?}", file.format)));
        }
        if file.version != MODEL_VERSION {
            return Err(Error::ModelFormat(format!(
                "unsupported model version {} (expected {MODEL_VERSION})",
                file.version
            )));
        }
        let n = file.n_channels;
        let mut dofs = BTreeMap::new();
        for r in file.dofs {
            let proto = |v: Vec<f64>| -> Result<QuantumState> {
                if v.len() != n {
                    return Err(Error::ModelFormat(format!("{} prototype has {} entries, expected {n}", r.dof, v.len())));
                }
                QuantumState::from_unit(v).map_err(|e| Error::ModelFormat(format!("{}: {e}", r.dof)))
            };
            let op = |rows: Vec<Vec<f64>>| -> Result<Operator> {
                let op = Operator::from_rows(&rows).map_err(|e| Error::ModelFormat(format!("{}: {e}", r.dof)))?;
                if op.dim() != n {
                    return Err(Error::ModelFormat(format!("{} operator is {}x{}, expected {n}x{n}", r.dof, op.dim(), op.dim())));
                }
                Ok(op)
            };
            let ops = DofOperators {
                proto_pos: proto(r.prototype_pos.clone())?,
                proto_neg: proto(r.prototype_neg.clone())?,
                p_pos: op(r.p_pos)?,
                p_neg: op(r.p_neg)?,
                p_zero: op(r.p_zero)?,
                theta_pos_max: r.theta_pos_max,
                theta_neg_max: r.theta_neg_max,
                overlap: r.overlap,
            };
            if !(ops.theta_pos_max > 0.0 && ops.theta_neg_max > 0.0) {
                return Err(Error::ModelFormat(format!("{} theta maxima must be positive", r.dof)));
            }
            if dofs.insert(r.dof, ops).is_some() {
                return Err(Error::ModelFormat(format!("duplicate entry for {}", r.dof)));
            }
        }
        Ok(ControllerModel {
            n_channels: n,
            dofs,
            decode_config: file.decode_config,
        })
    }
}

pub fn save_model(model: &ControllerModel, path: &Path) -> Result<()> {
    fs::write(path, model.to_json()).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<ControllerModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ControllerModel::from_json(&text).map_err(|e| e.context(format!("loading {}", path.display())))
}
