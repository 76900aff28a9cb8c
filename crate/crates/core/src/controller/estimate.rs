use nalgebra::DVector;

use super::DesiredOutput;
use crate::sim::{coriolis_matrix, force_vector, mass_matrix, RobotConfig};

/// Gray-box prior `h(ỹ)`: net muscle forces predicted from the output
/// trajectory before any learning.
pub trait EstimatedModel: Send + Sync {
    fn estimate(&self, target: &DesiredOutput) -> DVector<f64>;
}

/// `h ≡ 0`, used when no prior model is available.
#[derive(Debug, Clone, Copy)]
pub struct ZeroModel {
    pub dof: usize,
}

impl EstimatedModel for ZeroModel {
    fn estimate(&self, _target: &DesiredOutput) -> DVector<f64> {
        DVector::zeros(self.dof)
    }
}

/// Rigid-chain inverse dynamics assuming the bend is spread evenly over the
/// joints (`q_j = y/n`). Exact for a single segment.
#[derive(Debug, Clone)]
pub struct RigidInverseModel {
    pub robot: RobotConfig,
}

impl EstimatedModel for RigidInverseModel {
    fn estimate(&self, target: &DesiredOutput) -> DVector<f64> {
        let n = self.robot.dof();
        let share = |v: &DVector<f64>| DVector::from_element(n, v.sum() / n as f64);
        let q = share(&target.position);
        let qd = share(&target.velocity);
        let qdd = share(&target.acceleration);
        let tau = mass_matrix(&q, &self.robot) * qdd
            + coriolis_matrix(&q, &qd, &self.robot) * &qd
            + force_vector(&q, &qd, &self.robot);
        tau / self.robot.moment_arm
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{forward_dynamics, RobotState};

    #[test]
    fn zero_model_is_zero() {
        let h = ZeroModel { dof: 3 };
        assert_eq!(h.estimate(&DesiredOutput::scalar(1.0, 2.0, 3.0)), DVector::zeros(3));
    }

    #[test]
    fn rigid_inverse_recovers_single_segment_force() {
        let robot = RobotConfig {
            segments: 1,
            ..Default::default()
        };
        let h = RigidInverseModel { robot: robot.clone() };
        let state = RobotState {
            q: DVector::from_element(1, 0.3),
            q_dot: DVector::from_element(1, -0.4),
            time: 0.0,
        };
        let p = DVector::from_element(1, 1.7);
        let qdd = forward_dynamics(&state, &p, None, &robot).unwrap();
        let est = h.estimate(&DesiredOutput::scalar(qdd[0], -0.4, 0.3));
        assert!((est[0] - 1.7).abs() < 1e-10);
    }
}
