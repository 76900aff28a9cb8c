use serde::{Deserialize, Serialize};

use super::reference::ReferenceSpec;
use super::tracking::{closed_loop, ExperimentSetup, TrajectoryLog};
use crate::error::{Error, Result};
use crate::sim::{ExternalForce, RobotState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeSettings {
    /// Magnitude of the held tip angle; the in-region point is `+y`, the
    /// out-region point `−y`. rad.
    pub operating_point: f64,
    /// N·m
    pub torque: f64,
    pub segment_index: usize,
    /// Hold time before the probe starts, s.
    pub settle: f64,
    /// Probe duration, s.
    pub window: f64,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        Self {
            operating_point: 0.3,
            torque: 0.005,
            segment_index: 0,
            settle: 2.0,
            window: 1.0,
        }
    }
}

impl ProbeSettings {
    pub fn validate(&self) -> Result<()> {
        if !self.operating_point.is_finite() || !self.torque.is_finite() {
            return Err(Error::Config("probe operating point and torque must be finite".into()));
        }
        if !(self.settle >= 0.0 && self.window > 0.0) {
            return Err(Error::Config("probe.settle must be ≥ 0 and probe.window > 0".into()));
        }
        Ok(())
    }

    pub fn force(&self) -> ExternalForce {
        ExternalForce {
            segment_index: self.segment_index,
            torque: self.torque,
            t_start: self.settle,
            t_end: self.settle + self.window,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingPointResult {
    /// rad
    pub operating_point: f64,
    /// Peak `|y_probed − y_unprobed|` inside the probe window, rad.
    pub peak_deflection: f64,
    pub mean_alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StiffnessReport {
    pub probe_torque: f64,
    pub segment_index: usize,
    pub in_region: OperatingPointResult,
    pub out_region: OperatingPointResult,
    /// In-region over out-region deflection; `None` when the out-region
    /// deflection is zero.
    pub compliance_ratio: Option<f64>,
}

/// Holds the tip at `±operating_point`, applies the probe after settling,
/// and measures the deflection against an identical unprobed run.
pub fn run_stiffness_probe(setup: &ExperimentSetup<'_>, probe: &ProbeSettings) -> Result<StiffnessReport> {
    probe.validate()?;
    let force = probe.force();
    force.validate(setup.robot)?;
    let in_region = probe_point(setup, probe.operating_point.abs(), &force)?;
    let out_region = probe_point(setup, -probe.operating_point.abs(), &force)?;
    let compliance_ratio = (out_region.peak_deflection > 0.0).then(|| in_region.peak_deflection / out_region.peak_deflection);
    Ok(StiffnessReport {
        probe_torque: probe.torque,
        segment_index: probe.segment_index,
        in_region,
        out_region,
        compliance_ratio,
    })
}

fn probe_point(setup: &ExperimentSetup<'_>, y_op: f64, force: &ExternalForce) -> Result<OperatingPointResult> {
    let reference = ReferenceSpec::constant(y_op);
    let duration = force.t_end + setup.dt;
    let initial = RobotState::uniform_bend(setup.robot, y_op, 0.0);
    let probed = closed_loop(setup, &reference, duration, Some(force), initial.clone())?;
    let nominal = closed_loop(setup, &reference, duration, None, initial)?;
    let in_window = |log: &TrajectoryLog| -> Vec<(f64, f64, f64)> {
        log.rows
            .iter()
            .filter(|r| r.time >= force.t_start && r.time <= force.t_end + 0.5 * setup.dt)
            .map(|r| (r.time, r.y_actual, r.alpha))
            .collect()
    };
    let a = in_window(&probed);
    let b = in_window(&nominal);
    let peak_deflection = a.iter().zip(&b).map(|(p, n)| (p.1 - n.1).abs()).fold(0.0, f64::max);
    let mean_alpha = a.iter().map(|r| r.2).sum::<f64>() / a.len().max(1) as f64;
    Ok(OperatingPointResult {
        operating_point: y_op,
        peak_deflection,
        mean_alpha,
    })
}
