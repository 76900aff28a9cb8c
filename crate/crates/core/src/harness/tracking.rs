use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::reference::ReferenceSpec;
use crate::controller::{BlendConfig, BlendedController, EstimatedModel, Pid, PidConfig};
use crate::error::{Error, Result};
use crate::gp::TrainedGP;
use crate::sim::{output_map, step, ExternalForce, RobotConfig, RobotState};

/// Fraction of each run discarded before computing steady-state metrics.
pub const TRANSIENT_FRACTION: f64 = 0.1;

/// The pieces every closed-loop experiment needs.
#[derive(Clone, Copy)]
pub struct ExperimentSetup<'a> {
    pub robot: &'a RobotConfig,
    pub gp: &'a TrainedGP,
    pub model: &'a dyn EstimatedModel,
    pub pid: PidConfig,
    pub blend: BlendConfig,
    /// Simulation and control period, s. Overrides `pid.dt`.
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub time: f64,
    pub y_desired: f64,
    pub y_actual: f64,
    pub alpha: f64,
    pub variance: Vec<f64>,
    pub p_applied: Vec<f64>,
    pub p_ff: Vec<f64>,
    pub u: Vec<f64>,
}

/// One row per control step on a uniform time grid.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLog {
    pub rows: Vec<LogRow>,
}

impl TrajectoryLog {
    pub fn dof(&self) -> usize {
        self.rows.first().map_or(0, |r| r.p_applied.len())
    }

    pub fn duration(&self) -> f64 {
        match (self.rows.first(), self.rows.last()) {
            (Some(a), Some(b)) => b.time - a.time,
            _ => 0.0,
        }
    }

    /// Steady-state metrics over everything after the first 10 % of the run.
    pub fn metrics(&self) -> TrackingMetrics {
        let start = self.rows.first().map_or(0.0, |r| r.time) + TRANSIENT_FRACTION * self.duration();
        let window: Vec<&LogRow> = self.rows.iter().filter(|r| r.time >= start).collect();
        let count = window.len().max(1) as f64;
        let err = |r: &&LogRow| r.y_desired - r.y_actual;
        let rms_error = (window.iter().map(|r| err(r).powi(2)).sum::<f64>() / count).sqrt();
        let peak_error = window.iter().map(|r| err(r).abs()).fold(0.0, f64::max);
        let mean = |rows: &mut dyn Iterator<Item = &&LogRow>| {
            let (sum, n) = rows.fold((0.0, 0usize), |(s, n), r| (s + r.alpha, n + 1));
            (n > 0).then(|| sum / n as f64)
        };
        TrackingMetrics {
            rms_error,
            peak_error,
            mean_alpha: mean(&mut window.iter()).unwrap_or(0.0),
            mean_alpha_in_region: mean(&mut window.iter().filter(|r| r.y_desired > 0.0)),
            mean_alpha_out_region: mean(&mut window.iter().filter(|r| r.y_desired <= 0.0)),
            steps: window.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingMetrics {
    pub rms_error: f64,
    pub peak_error: f64,
    pub mean_alpha: f64,
    /// Over steps whose desired tip angle is positive.
    pub mean_alpha_in_region: Option<f64>,
    pub mean_alpha_out_region: Option<f64>,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackingRun {
    pub log: TrajectoryLog,
    pub metrics: TrackingMetrics,
}

/// A run that stopped early; `partial` holds every completed step.
#[derive(Debug)]
pub struct TrackingFailure {
    pub partial: TrajectoryLog,
    pub error: Error,
}

impl From<TrackingFailure> for Error {
    fn from(f: TrackingFailure) -> Self {
        f.error
    }
}

/// Closed-loop run from a state on the reference (`y = y_d(0)` spread
/// evenly over the joints, matching velocity).
pub fn run_tracking(
    setup: &ExperimentSetup<'_>,
    reference: &ReferenceSpec,
    duration: f64,
    disturbance: Option<&ExternalForce>,
) -> Result<TrackingRun, TrackingFailure> {
    let fail = |error| TrackingFailure {
        partial: TrajectoryLog::default(),
        error,
    };
    reference.validate().map_err(fail)?;
    if !(duration.is_finite() && duration > 0.0) {
        return Err(fail(Error::Config(format!("tracking duration must be positive, got {duration}"))));
    }
    if let Some(d) = disturbance {
        d.validate(setup.robot).map_err(fail)?;
    }
    let start = reference.at(0.0);
    let initial = RobotState::uniform_bend(setup.robot, start.position[0], start.velocity[0]);
    let log = closed_loop(setup, reference, duration, disturbance, initial)?;
    let metrics = log.metrics();
    Ok(TrackingRun { log, metrics })
}

pub(crate) fn closed_loop(
    setup: &ExperimentSetup<'_>,
    reference: &ReferenceSpec,
    duration: f64,
    disturbance: Option<&ExternalForce>,
    initial: RobotState,
) -> Result<TrajectoryLog, TrackingFailure> {
    let mut log = TrajectoryLog::default();
    let pid_cfg = PidConfig { dt: setup.dt, ..setup.pid };
    let pid = match Pid::new(pid_cfg, setup.robot.outputs()) {
        Ok(p) => p,
        Err(error) => return Err(TrackingFailure { partial: log, error }),
    };
    let mut controller = match BlendedController::new(setup.gp, setup.model, pid, setup.blend) {
        Ok(c) => c,
        Err(error) => return Err(TrackingFailure { partial: log, error }),
    };
    if setup.gp.outputs() != setup.robot.dof() {
        let error = Error::invalid(format!(
            "GP predicts {} forces, robot has {} actuators",
            setup.gp.outputs(),
            setup.robot.dof()
        ));
        return Err(TrackingFailure { partial: log, error });
    }

    let steps = (duration / setup.dt).round() as usize;
    let mut state = initial;
    for k in 0..steps {
        let t = k as f64 * setup.dt;
        state.time = t;
        let target = reference.at(t);
        let y = output_map(&state.q, setup.robot);
        let out = match controller.step(&target, &y) {
            Ok(o) => o,
            Err(error) => return Err(TrackingFailure { partial: log, error }),
        };
        log.rows.push(LogRow {
            time: t,
            y_desired: target.position[0],
            y_actual: y[0],
            alpha: out.alpha,
            variance: out.variances.iter().copied().collect(),
            p_applied: out.force.iter().copied().collect(),
            p_ff: out.feedforward.iter().copied().collect(),
            u: out.feedback.iter().copied().collect(),
        });
        state = match step(&state, &out.force, disturbance, setup.dt, setup.robot) {
            Ok(s) => s,
            Err(error) => return Err(TrackingFailure { partial: log, error }),
        };
    }
    Ok(log)
}

/// `p = (1 − α)·p_ff + α·u` recomputed from a logged row.
pub fn recompose(row: &LogRow) -> Vec<f64> {
    crate::controller::blend_forces(
        row.alpha,
        &DVector::from_column_slice(&row.p_ff),
        &DVector::from_column_slice(&row.u),
    )
    .iter()
    .copied()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(t: f64, yd: f64, y: f64, a: f64) -> LogRow {
        LogRow {
            time: t,
            y_desired: yd,
            y_actual: y,
            alpha: a,
            variance: vec![0.0],
            p_applied: vec![0.0],
            p_ff: vec![0.0],
            u: vec![0.0],
        }
    }

    #[test]
    fn metrics_skip_transient_and_split_regions() {
        let mut log = TrajectoryLog::default();
        for k in 0..=10 {
            let t = k as f64;
            let yd = if k % 2 == 0 { 0.5 } else { -0.5 };
            let err = if k == 0 { 100.0 } else { 0.1 };
            log.rows.push(row(t, yd, yd - err, if yd > 0.0 { 0.1 } else { 0.9 }));
        }
        let m = log.metrics();
        assert_eq!(m.steps, 10);
        assert!((m.rms_error - 0.1).abs() < 1e-12);
        assert!((m.peak_error - 0.1).abs() < 1e-12);
        assert!((m.mean_alpha_in_region.unwrap() - 0.1).abs() < 1e-12);
        assert!((m.mean_alpha_out_region.unwrap() - 0.9).abs() < 1e-12);
    }
}
