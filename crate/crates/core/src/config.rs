//! Whole-project configuration, loaded from TOML.
//!
//! Every section is optional and falls back to the defaults below:
//!
//! ```toml
//! [gen]
//! freq_range = { min = 130.81, max = 523.25 }
//! chord_counts = [3, 4, 5, 6, 7]
//! duration_range = { min = 0.2, max = 0.9 }
//! target_seconds = 4.0
//!
//! [render]
//! sample_rate = 16000
//! clip_seconds = 4.0
//! peak_level = 0.8
//! fade_seconds = 0.002
//! synthesis = "ideal"          # or "band-limited"
//! adsr = { name = "stable", attack = 0.01, decay = 0.01, sustain = 1.0, release = 0.01 }
//!
//! [base]
//! train_val_start = 0
//! train_size = 40000
//! val_size = 10000
//! test_start = 55000
//! test_size = 10000
//! timbres = ["sine", "square", "sawtooth", "triangle"]
//! amplitude = "stable"
//!
//! [shift]
//! # domain_schedule = [0, 2, 8, ...]   (12 counts; default scales to train_size)
//! bias_map = { major = "sine", minor = "square" }
//! remainder = "balanced"       # or "bernoulli"
//! shuffle_seed = 20240901
//! ```
//!
//! `render.waveshape` is ignored by dataset builders: each record renders
//! with its own timbre.

use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::melodygen::{GenConfig, GENERATOR_VERSION};
use crate::shiftlab::{BaseDatasetConfig, ShiftConfig};
use crate::synth::RenderConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] io::Error),
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("cannot parse embedded config: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectConfig {
    pub gen: GenConfig,
    pub render: RenderConfig,
    pub base: BaseDatasetConfig,
    pub shift: ShiftConfig,
}

impl ProjectConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: ProjectConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    /// Inverse of [`canonical_json`](Self::canonical_json), used to recover
    /// the configuration recorded in a manifest header.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: ProjectConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        self.gen.validate().map_err(|e| invalid(&e))?;
        self.render.validate().map_err(|e| invalid(&e))?;
        self.base.validate().map_err(|e| invalid(&e))?;
        self.shift
            .schedule(self.base.train_size)
            .map_err(|e| invalid(&e))?;
        if self.base.amplitude != self.render.adsr.name {
            return Err(ConfigError::Invalid(format!(
                "base amplitude `{}` disagrees with render envelope `{}`",
                self.base.amplitude, self.render.adsr.name
            )));
        }
        Ok(())
    }

    /// Single-line JSON with a fixed field order; the input to [`hash`](Self::hash).
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// First 16 hex digits of SHA-256 over the generator version and the
    /// canonical config.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(GENERATOR_VERSION.as_bytes());
        h.update(b"\n");
        h.update(self.canonical_json().as_bytes());
        h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}
