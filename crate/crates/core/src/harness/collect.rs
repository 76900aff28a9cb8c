use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::excitation::{generate_excitation, ExcitationProfile};
use crate::controller::{DesiredOutput, EstimatedModel, RigidInverseModel, ZeroModel};
use crate::error::{Error, Result};
use crate::gp::Dataset;
use crate::sim::{forward_dynamics, output_map, step, RobotConfig, RobotState};

/// Which gray-box prior `h` the residual targets are taken against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatedModelKind {
    #[default]
    Zero,
    RigidInverse,
}

impl EstimatedModelKind {
    pub fn build(&self, robot: &RobotConfig) -> Box<dyn EstimatedModel> {
        match self {
            EstimatedModelKind::Zero => Box::new(ZeroModel { dof: robot.dof() }),
            EstimatedModelKind::RigidInverse => Box::new(RigidInverseModel { robot: robot.clone() }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CollectSettings {
    /// Integration and control period, s.
    pub dt: f64,
    /// Points kept after decimation (`n_d`).
    pub samples: usize,
    /// Keep only samples with positive tip angle.
    pub positive_region_only: bool,
    /// Initial interval over which the excitation fades in from zero; no
    /// samples are kept from it. s.
    pub warmup: f64,
    pub estimated_model: EstimatedModelKind,
}

impl Default for CollectSettings {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            samples: 250,
            positive_region_only: true,
            warmup: 5.0,
            estimated_model: EstimatedModelKind::Zero,
        }
    }
}

impl CollectSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Config(format!("collection.dt must be positive, got {}", self.dt)));
        }
        if !(self.warmup.is_finite() && self.warmup >= 0.0) {
            return Err(Error::Config(format!("collection.warmup must be non-negative, got {}", self.warmup)));
        }
        if self.samples == 0 {
            return Err(Error::Config("collection.samples must be at least 1".into()));
        }
        Ok(())
    }
}

/// Everything that determines a recorded dataset; hashed into its fingerprint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollectionInfo {
    pub robot: RobotConfig,
    pub excitation: ExcitationProfile,
    pub settings: CollectSettings,
}

impl CollectionInfo {
    pub fn fingerprint(&self) -> String {
        let canonical = serde_json::to_string(self).expect("collection info serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    pub fn collect(&self) -> Result<RecordedDataset> {
        let h = self.settings.estimated_model.build(&self.robot);
        let recording = collect_dataset(&self.robot, h.as_ref(), &self.excitation, &self.settings)?;
        Ok(RecordedDataset {
            fingerprint: self.fingerprint(),
            info: self.clone(),
            recording,
        })
    }
}

/// Decimated training set together with the raw applied forces and their
/// time stamps.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub time: Vec<f64>,
    /// `n_d × n` applied net muscle forces.
    pub forces: DMatrix<f64>,
    /// Inputs `[ÿ, ẏ, y]`, targets `p − h(ỹ)`.
    pub dataset: Dataset,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordedDataset {
    pub info: CollectionInfo,
    pub fingerprint: String,
    pub recording: Recording,
}

/// Drives the robot open-loop with the excitation (same force on every
/// segment, faded in over the warm-up), records `ỹ = (ÿ, ẏ, y)` with `ÿ` from the forward dynamics at
/// each sample, and keeps `settings.samples` points evenly spaced in time.
pub fn collect_dataset(
    robot: &RobotConfig,
    h: &dyn EstimatedModel,
    profile: &ExcitationProfile,
    settings: &CollectSettings,
) -> Result<Recording> {
    robot.validate()?;
    settings.validate()?;
    let forces = generate_excitation(profile, 1.0 / settings.dt)?;
    let n = robot.dof();

    struct Sample {
        time: f64,
        input: [f64; 3],
        force: f64,
    }
    let mut kept = Vec::new();
    let mut state = RobotState::rest(robot);
    for (k, &raw) in forces.iter().enumerate() {
        let t = k as f64 * settings.dt;
        let warming = t < settings.warmup;
        let f = if warming {
            raw * (0.5 - 0.5 * (std::f64::consts::PI * t / settings.warmup).cos())
        } else {
            raw
        };
        let p = nalgebra::DVector::from_element(n, f);
        let qdd = forward_dynamics(&state, &p, None, robot)?;
        let y = output_map(&state.q, robot)[0];
        if !warming && (!settings.positive_region_only || y > 0.0) {
            kept.push(Sample {
                time: state.time,
                input: [qdd.sum(), state.q_dot.sum(), y],
                force: f,
            });
        }
        state = step(&state, &p, None, settings.dt, robot)?;
    }
    if kept.is_empty() {
        return Err(Error::invalid("excitation never entered the training region"));
    }

    let picks = decimate(kept.len(), settings.samples);
    let nd = picks.len();
    let mut inputs = DMatrix::zeros(3, nd);
    let mut applied = DMatrix::zeros(nd, n);
    let mut targets = DMatrix::zeros(nd, n);
    let mut time = Vec::with_capacity(nd);
    for (j, &idx) in picks.iter().enumerate() {
        let s = &kept[idx];
        inputs.column_mut(j).copy_from_slice(&s.input);
        let prior = h.estimate(&DesiredOutput::from_input(&s.input)?);
        for i in 0..n {
            applied[(j, i)] = s.force;
            targets[(j, i)] = s.force - prior[i];
        }
        time.push(s.time);
    }
    Ok(Recording {
        time,
        forces: applied,
        dataset: Dataset::new(inputs, targets)?,
    })
}

/// `count` indices spread uniformly over `0..len` (all of them if fewer).
fn decimate(len: usize, count: usize) -> Vec<usize> {
    if count >= len {
        return (0..len).collect();
    }
    if count == 1 {
        return vec![0];
    }
    (0..count)
        .map(|i| ((i as f64) * (len - 1) as f64 / (count - 1) as f64).round() as usize)
        .collect()
}
