use nalgebra::DVector;

use super::dynamics::forward_dynamics;
use super::{ExternalForce, RobotConfig, RobotState};
use crate::error::{Error, Result};

/// One classical fourth-order Runge–Kutta step with the muscle forces `p`
/// held constant over the step. The probe force is sampled at each stage
/// time.
pub fn step(
    state: &RobotState,
    p: &DVector<f64>,
    ext: Option<&ExternalForce>,
    dt: f64,
    cfg: &RobotConfig,
) -> Result<RobotState> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid(format!("time step must be positive, got {dt}")));
    }
    state.check(cfg)?;
    let accel = |s: &RobotState| forward_dynamics(s, p, ext, cfg);
    let offset = |dq: &DVector<f64>, dqd: &DVector<f64>, h: f64| RobotState {
        q: &state.q + dq * h,
        q_dot: &state.q_dot + dqd * h,
        time: state.time + h,
    };

    let k1q = state.q_dot.clone();
    let k1v = accel(state)?;
    let s2 = offset(&k1q, &k1v, 0.5 * dt);
    let k2q = s2.q_dot.clone();
    let k2v = accel(&s2)?;
    let s3 = offset(&k2q, &k2v, 0.5 * dt);
    let k3q = s3.q_dot.clone();
    let k3v = accel(&s3)?;
    let s4 = offset(&k3q, &k3v, dt);
    let k4q = s4.q_dot.clone();
    let k4v = accel(&s4)?;

    let next = RobotState {
        q: &state.q + (k1q + &k2q * 2.0 + &k3q * 2.0 + k4q) * (dt / 6.0),
        q_dot: &state.q_dot + (k1v + &k2v * 2.0 + &k3v * 2.0 + k4v) * (dt / 6.0),
        time: state.time + dt,
    };
    if !next.is_finite() {
        return Err(Error::Divergence { time: next.time });
    }
    Ok(next)
}

/// Integrates `steps` fixed steps, asking `forces` for the muscle forces
/// at the start of every step. Returns all states including the initial one.
pub fn simulate(
    initial: RobotState,
    mut forces: impl FnMut(&RobotState) -> DVector<f64>,
    ext: Option<&ExternalForce>,
    dt: f64,
    steps: usize,
    cfg: &RobotConfig,
) -> Result<Vec<RobotState>> {
    let mut out = Vec::with_capacity(steps + 1);
    out.push(initial);
    for _ in 0..steps {
        let s = out.last().expect("non-empty");
        let p = forces(s);
        let next = step(s, &p, ext, dt, cfg)?;
        out.push(next);
    }
    Ok(out)
}
