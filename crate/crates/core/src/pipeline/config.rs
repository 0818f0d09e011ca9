//! Versioned TOML configuration for the command pipeline.
//!
//! ```toml
//! version = 1
//! seed = 7
//!
//! [synth]
//! speakers = 10
//!
//! [network]
//! preset = "desk"
//!
//! [train]
//! epochs = 12
//! lr = 1e-3
//!
//! [backend]
//! cohort_size = 0
//! ```
//!
//! Every section and key is optional except `version`; unknown keys are
//! rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::backend::BackendConfig;
use crate::container::read_text;
use crate::error::{Error, Result};
use crate::features::MfccConfig;
use crate::model::NetworkConfig;
use crate::nn::AdamConfig;
use crate::synth::CorpusSpec;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Full,
    Desk,
    Tiny,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkSection {
    pub preset: Preset,
    /// Overrides the preset's input width (frames).
    pub input_width: Option<usize>,
}

impl Default for NetworkSection {
    fn default() -> Self {
        Self { preset: Preset::Desk, input_width: None }
    }
}

impl NetworkSection {
    pub fn build(&self, num_classes: usize) -> NetworkConfig {
        let mut c = match self.preset {
            Preset::Full => NetworkConfig::full(num_classes),
            Preset::Desk => NetworkConfig::desk(num_classes),
            Preset::Tiny => NetworkConfig { input_height: crate::features::NUM_BINS, ..NetworkConfig::tiny(num_classes) },
        };
        if let Some(w) = self.input_width {
            c.input_width = w;
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self { epochs: 12, batch_size: 32, lr: 1e-3 }
    }
}

impl TrainSection {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig { lr: self.lr, ..AdamConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BackendSection {
    pub wccn: bool,
    pub snorm: bool,
    /// Cohort utterances kept per phrase; 0 keeps every background utterance.
    pub cohort_size: usize,
}

impl Default for BackendSection {
    fn default() -> Self {
        let b = BackendConfig::default();
        Self { wccn: b.wccn, snorm: b.snorm, cohort_size: 0 }
    }
}

impl BackendSection {
    pub fn config(&self) -> BackendConfig {
        BackendConfig { wccn: self.wccn, snorm: self.snorm, cohort_size: self.cohort_size }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsSection {
    /// Use an existing corpus instead of `<output-dir>/corpus`.
    pub corpus: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub synth: CorpusSpec,
    #[serde(default)]
    pub mfcc: MfccConfig,
    #[serde(default)]
    pub network: NetworkSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub backend: BackendSection,
    #[serde(default)]
    pub paths: PathsSection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            seed: 7,
            synth: CorpusSpec::default(),
            mfcc: MfccConfig::default(),
            network: NetworkSection::default(),
            train: TrainSection::default(),
            backend: BackendSection::default(),
            paths: PathsSection::default(),
        }
    }
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string().replace('\n', " ")))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!("config version {}, expected {CONFIG_VERSION}", self.version)));
        }
        if !(self.train.lr > 0.0 && self.train.lr.is_finite()) {
            return Err(Error::Config(format!("train.lr must be positive, got {}", self.train.lr)));
        }
        if self.train.epochs == 0 || self.train.batch_size == 0 {
            return Err(Error::Config("train.epochs and train.batch_size must be positive".into()));
        }
        if let Some(c) = &self.paths.corpus {
            if !c.is_dir() {
                return Err(Error::MissingArtifact(c.clone()));
            }
        }
        self.synth.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = PipelineConfig::default();
        assert_eq!(PipelineConfig::parse(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn schema_is_enforced() {
        assert!(PipelineConfig::parse("version = 1\nseed = 3\n[train]\nepochs = 2\n").is_ok());
        assert!(matches!(PipelineConfig::parse("seed = 3\n"), Err(Error::Config(_))));
        assert!(matches!(PipelineConfig::parse("version = 2\n"), Err(Error::Config(_))));
        assert!(matches!(PipelineConfig::parse("version = 1\nsed = 3\n"), Err(Error::Config(_))));
        assert!(matches!(PipelineConfig::parse("version = 1\n[train]\nlr = 0.0\n"), Err(Error::Config(_))));
    }
}
