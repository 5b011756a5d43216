//! Experiment configuration: a flat TOML key-value file. Values are resolved
//! as command-line override, then file, then built-in default.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::decode::{DecodeConfig, DEFAULT_OVERLAP_EPSILON, DEFAULT_REST_THRESHOLD};
use crate::error::{Error, Result};
use crate::metrics::BlockRule;
use crate::signal::{DEFAULT_SAMPLE_RATE, DEFAULT_WINDOW_MS};
use crate::synth::{MixingModel, DEFAULT_ANGLE_RANGE};
use crate::types::Dof;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MixingKind {
    /// Overlapping columns where D3 shares channels with D1 and D2.
    #[default]
    Masking,
    /// Dominant channels per action with a small common floor.
    Separated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub window_ms: f64,
    pub step_ms: f64,
    pub sample_rate: f64,
    pub deadband: f64,
    pub rest_threshold: f64,
    pub overlap_epsilon: f64,
    pub training_sizes: Vec<usize>,
    pub seed: u64,
    pub dofs: Vec<Dof>,
    pub block_rule: BlockRule,
    pub mixing: MixingKind,
    pub noise_sigma: f64,
    pub angle_min: f64,
    pub angle_max: f64,
    pub test_blocks: usize,
    pub test_windows: usize,
    pub jitter: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            window_ms: DEFAULT_WINDOW_MS,
            step_ms: DEFAULT_WINDOW_MS,
            sample_rate: DEFAULT_SAMPLE_RATE,
            deadband: 0.0,
            rest_threshold: DEFAULT_REST_THRESHOLD,
            overlap_epsilon: DEFAULT_OVERLAP_EPSILON,
            training_sizes: vec![500, 2000],
            seed: 1,
            dofs: vec![Dof::D1, Dof::D3],
            block_rule: BlockRule::Majority,
            mixing: MixingKind::Masking,
            noise_sigma: 0.05,
            angle_min: DEFAULT_ANGLE_RANGE.0,
            angle_max: DEFAULT_ANGLE_RANGE.1,
            test_blocks: 55,
            test_windows: 8216,
            jitter: 2.0,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| e.context(format!("reading config {}", path.display())))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Override one key with a TOML value literal; bare words are read as strings.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let mut table = toml::Table::try_from(&*self).expect("config serializes");
        if !table.contains_key(key) {
            return Err(Error::Config(format!("unknown config key {key:?}")));
        }
        let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(value.to_string()));
        let parsed = match (&table[key], parsed) {
            (toml::Value::Float(_), toml::Value::Integer(i)) => toml::Value::Float(i as f64),
            (toml::Value::Array(_), v @ toml::Value::Array(_)) => v,
            (toml::Value::Array(_), v) => toml::Value::Array(vec![v]),
            (_, v) => v,
        };
        table.insert(key.to_string(), parsed);
        let next: ExperimentConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("{key}: {}", e.message())))?;
        next.validate()?;
        *self = next;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.window_ms > 0.0 && self.window_ms.is_finite()) {
            return bad(format!("window_ms must be positive, got {}", self.window_ms));
        }
        if !(self.step_ms > 0.0 && self.step_ms.is_finite()) {
            return bad(format!("step_ms must be positive, got {}", self.step_ms));
        }
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return bad(format!("sample_rate must be positive, got {}", self.sample_rate));
        }
        if self.deadband.is_nan() || self.deadband < 0.0 {
            return bad(format!("deadband must be non-negative, got {}", self.deadband));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise_sigma must be non-negative, got {}", self.noise_sigma));
        }
        if self.jitter.is_nan() || self.jitter < 0.0 {
            return bad(format!("jitter must be non-negative, got {}", self.jitter));
        }
        if !(self.angle_min > 0.0 && self.angle_min < self.angle_max && self.angle_max.is_finite()) {
            return bad(format!("need 0 < angle_min < angle_max, got {} and {}", self.angle_min, self.angle_max));
        }
        if self.training_sizes.is_empty() || self.training_sizes.contains(&0) {
            return bad("training_sizes must list positive per-action counts".into());
        }
        if self.dofs.is_empty() {
            return bad("dofs must name at least one DOF".into());
        }
        let mut seen = self.dofs.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.dofs.len() {
            return bad(format!("dofs contains duplicates: {:?}", self.dofs));
        }
        if self.test_blocks == 0 || self.test_windows < self.test_blocks {
            return bad("test_windows must be at least test_blocks, which must be positive".into());
        }
        self.decode_config().validate()
    }

    pub fn decode_config(&self) -> DecodeConfig {
        DecodeConfig {
            rest_threshold: self.rest_threshold,
            overlap_epsilon: self.overlap_epsilon,
        }
    }

    pub fn angle_range(&self) -> (f64, f64) {
        (self.angle_min, self.angle_max)
    }

    pub fn mixing_model(&self) -> MixingModel {
        match self.mixing {
            MixingKind::Masking => MixingModel::masking_default(self.noise_sigma, self.seed),
            MixingKind::Separated => MixingModel::separated(self.noise_sigma, self.seed),
        }
    }

    /// SHA-256 of the canonical TOML form, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }
}
