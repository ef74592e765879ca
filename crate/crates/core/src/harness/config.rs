use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corruption::{CorruptionSpec, MAX_DAMAGE_FRACTION};
use crate::error::{config_err, Error, Result};
use crate::model::{ModelConfig, SPATIAL_MULTIPLE};

/// Current version of the run-config schema.
pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    /// Momentum SGD; weight decay is added to the gradient.
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub name: OptimizerKind,
    pub learning_rate: f64,
    pub weight_decay: f64,
    /// SGD momentum, or Adam's beta1.
    pub momentum: f64,
    /// Adam's beta2.
    pub beta2: f64,
    pub eps: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            name: OptimizerKind::Sgd,
            learning_rate: 0.01,
            weight_decay: 1e-4,
            momentum: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Random damage applied to training patches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorruptionAugment {
    /// Chance that a patch is corrupted at all.
    pub probability: f64,
    /// Damage fractions are drawn uniformly from `[0, max_fraction]`.
    pub max_fraction: f64,
    /// Template for everything except fraction and seed.
    pub spec: CorruptionSpec,
}

impl Default for CorruptionAugment {
    fn default() -> Self {
        CorruptionAugment {
            probability: 0.5,
            max_fraction: MAX_DAMAGE_FRACTION,
            spec: CorruptionSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub schema_version: u32,
    pub model: ModelConfig,
    pub optimizer: OptimizerConfig,
    pub batch_size: usize,
    pub max_steps: usize,
    /// Side of the square training crops. Also the evaluation window size.
    pub patch_size: usize,
    /// Random quarter-turn rotations of training patches.
    pub augmentation: bool,
    pub corruption_augmentation: Option<CorruptionAugment>,
    /// Validation cadence in steps; 0 disables periodic validation.
    pub validate_every: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            schema_version: CONFIG_SCHEMA_VERSION,
            model: ModelConfig::tiny(),
            optimizer: OptimizerConfig::default(),
            batch_size: 1,
            max_steps: 200,
            patch_size: 64,
            augmentation: true,
            corruption_augmentation: None,
            validate_every: 50,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(config_err!(
                "unsupported config schema_version {} (expected {CONFIG_SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        self.model.validate()?;
        if self.batch_size == 0 {
            return Err(config_err!("batch_size must be at least 1"));
        }
        if self.max_steps == 0 {
            return Err(config_err!("max_steps must be at least 1"));
        }
        if self.patch_size == 0 || self.patch_size % SPATIAL_MULTIPLE != 0 {
            return Err(config_err!(
                "patch_size {} must be a positive multiple of {SPATIAL_MULTIPLE}",
                self.patch_size
            ));
        }
        let o = &self.optimizer;
        if !(o.learning_rate > 0.0 && o.learning_rate.is_finite()) {
            return Err(config_err!("learning_rate must be positive"));
        }
        if !(0.0..1.0).contains(&o.momentum) || !(0.0..1.0).contains(&o.beta2) {
            return Err(config_err!("momentum and beta2 must lie in [0, 1)"));
        }
        if o.weight_decay < 0.0 || o.eps <= 0.0 {
            return Err(config_err!("weight_decay must be >= 0 and eps > 0"));
        }
        if let Some(a) = &self.corruption_augmentation {
            if !(0.0..=1.0).contains(&a.probability) {
                return Err(config_err!("corruption probability {} outside [0, 1]", a.probability));
            }
            if !(0.0..=MAX_DAMAGE_FRACTION).contains(&a.max_fraction) {
                return Err(config_err!(
                    "corruption max_fraction {} outside [0, {MAX_DAMAGE_FRACTION}]",
                    a.max_fraction
                ));
            }
            let mut probe = a.spec.clone();
            probe.damage_fraction = a.max_fraction;
            probe.validate()?;
        }
        Ok(())
    }

    /// Reads a `.toml` or `.json` config, chosen by extension.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: TrainConfig = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::from_str(&text)?,
            Some("toml") => toml::from_str(&text).map_err(|e| Error::Toml(e.to_string()))?,
            other => {
                return Err(config_err!(
                    "unknown config extension {:?}; use .toml or .json",
                    other.unwrap_or("")
                ))
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Toml(e.to_string()))
    }
}
