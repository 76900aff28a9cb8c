//! Experiment configuration, read from a TOML file. Every section and
//! field is optional; missing values take the built-in defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::controller::{BlendConfig, PidConfig};
use crate::error::{Error, Result};
use crate::gp::Hyperparameters;
use crate::harness::{CollectSettings, CollectionInfo, ExcitationProfile, ProbeSettings, ReferenceSpec};
use crate::sim::RobotConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSettings {
    pub restarts: usize,
    pub seed: u64,
}

impl Default for TrainingSettings {
    fn default() -> Self {
        Self { restarts: 4, seed: 0 }
    }
}

/// Sigmoid gate gains. Without `c1`, it is set to `1/σ_n²` using the
/// smallest learned noise variance of the trained model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlendSettings {
    pub c1: Option<f64>,
    pub c2: f64,
}

impl Default for BlendSettings {
    fn default() -> Self {
        Self { c1: None, c2: -5.0 }
    }
}

impl BlendSettings {
    pub fn resolve(&self, hp: &Hyperparameters) -> Result<BlendConfig> {
        let c1 = match self.c1 {
            Some(c1) => c1,
            None => {
                let noise = hp.noise_variance.iter().copied().fold(f64::INFINITY, f64::min);
                BlendConfig::relative_to_noise(noise)?.c1
            }
        };
        BlendConfig::new(c1, self.c2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackingSettings {
    #[serde(flatten)]
    pub reference: ReferenceSpec,
    /// s
    pub duration: f64,
}

impl Default for TrackingSettings {
    fn default() -> Self {
        Self {
            reference: ReferenceSpec::default(),
            duration: 20.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub robot: RobotConfig,
    pub collection: CollectSettings,
    pub excitation: ExcitationProfile,
    pub training: TrainingSettings,
    pub blend: BlendSettings,
    pub pid: PidConfig,
    pub tracking: TrackingSettings,
    pub probe: ProbeSettings,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.robot.validate()?;
        self.collection.validate()?;
        self.excitation.validate(1.0 / self.collection.dt)?;
        if self.training.restarts == 0 {
            return Err(Error::Config("training.restarts must be at least 1".into()));
        }
        if let Some(c1) = self.blend.c1 {
            BlendConfig::new(c1, self.blend.c2)?;
        }
        self.pid.validate()?;
        self.tracking.reference.validate()?;
        if !(self.tracking.duration.is_finite() && self.tracking.duration > 0.0) {
            return Err(Error::Config(format!(
                "tracking.duration must be positive, got {}",
                self.tracking.duration
            )));
        }
        self.probe.validate()?;
        if self.probe.segment_index >= self.robot.segments {
            return Err(Error::Config(format!(
                "probe.segment_index {} out of range for {} segments",
                self.probe.segment_index, self.robot.segments
            )));
        }
        Ok(())
    }

    pub fn collection_info(&self) -> CollectionInfo {
        CollectionInfo {
            robot: self.robot.clone(),
            excitation: self.excitation.clone(),
            settings: self.collection.clone(),
        }
    }
}
