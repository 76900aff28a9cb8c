//! Planar serial chain of uniform rods standing in for a segmented,
//! worm-like soft robot.
//!
//! Joint `j` carries relative angle `q_j`; link `i` points along absolute
//! angle `φ_i = Σ_{j≤i} q_j`, measured from straight down. Every joint has a
//! passive torsional spring to `q = 0` and viscous damping, and is driven by
//! one signed net muscle force (left minus right) through a constant moment
//! arm.

mod dynamics;
mod integrate;

pub use dynamics::{
    actuator_force, coriolis_matrix, force_vector, forward_dynamics, gravity_torque, mass_matrix,
    mass_matrix_derivatives, output_jacobian, output_map, potential_energy, total_energy,
};
pub use integrate::{simulate, step};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical parameters of the chain. One net actuator per segment, so the
/// number of generalized coordinates equals `segments`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobotConfig {
    pub segments: usize,
    /// m
    pub segment_length: f64,
    /// kg
    pub segment_mass: f64,
    /// m, maps net muscle force to joint torque.
    pub moment_arm: f64,
    /// N·m/rad
    pub passive_stiffness: f64,
    /// N·m·s/rad
    pub damping: f64,
    /// m/s²
    pub gravity: f64,
}

impl Default for RobotConfig {
    fn default() -> Self {
        Self {
            segments: 3,
            segment_length: 0.1,
            segment_mass: 0.05,
            moment_arm: 0.02,
            passive_stiffness: 0.05,
            damping: 0.01,
            gravity: 9.81,
        }
    }
}

impl RobotConfig {
    pub fn validate(&self) -> Result<()> {
        if self.segments == 0 {
            return Err(Error::Config("robot.segments must be at least 1".into()));
        }
        let positive = [
            ("robot.segment_length", self.segment_length),
            ("robot.segment_mass", self.segment_mass),
            ("robot.moment_arm", self.moment_arm),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        // zero allowed: undamped / spring-free chains are valid test subjects
        let non_negative = [
            ("robot.passive_stiffness", self.passive_stiffness),
            ("robot.damping", self.damping),
            ("robot.gravity", self.gravity),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be non-negative, got {v}")));
            }
        }
        Ok(())
    }

    /// Number of generalized coordinates (and net actuators).
    pub fn dof(&self) -> usize {
        self.segments
    }

    /// Tip-angle output dimension.
    pub fn outputs(&self) -> usize {
        1
    }

    pub(crate) fn link_inertia(&self) -> f64 {
        self.segment_mass * self.segment_length * self.segment_length / 12.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    /// rad
    pub q: DVector<f64>,
    /// rad/s
    pub q_dot: DVector<f64>,
    /// s
    pub time: f64,
}

impl RobotState {
    pub fn rest(cfg: &RobotConfig) -> Self {
        Self {
            q: DVector::zeros(cfg.dof()),
            q_dot: DVector::zeros(cfg.dof()),
            time: 0.0,
        }
    }

    /// Straight-bend configuration with the tip at `y` moving at `y_dot`,
    /// split evenly over the joints.
    pub fn uniform_bend(cfg: &RobotConfig, y: f64, y_dot: f64) -> Self {
        let n = cfg.dof() as f64;
        Self {
            q: DVector::from_element(cfg.dof(), y / n),
            q_dot: DVector::from_element(cfg.dof(), y_dot / n),
            time: 0.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.time.is_finite() && self.q.iter().chain(self.q_dot.iter()).all(|v| v.is_finite())
    }

    pub(crate) fn check(&self, cfg: &RobotConfig) -> Result<()> {
        if self.q.len() != cfg.dof() || self.q_dot.len() != cfg.dof() {
            return Err(Error::invalid(format!(
                "state has {} / {} coordinates, robot has {}",
                self.q.len(),
                self.q_dot.len(),
                cfg.dof()
            )));
        }
        if !self.is_finite() {
            return Err(Error::Divergence { time: self.time });
        }
        Ok(())
    }
}

/// Generalized probe torque applied at one joint during `[t_start, t_end)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExternalForce {
    pub segment_index: usize,
    /// N·m
    pub torque: f64,
    pub t_start: f64,
    pub t_end: f64,
}

impl ExternalForce {
    pub fn validate(&self, cfg: &RobotConfig) -> Result<()> {
        if self.segment_index >= cfg.segments {
            return Err(Error::invalid(format!(
                "probe segment {} out of range for {} segments",
                self.segment_index, cfg.segments
            )));
        }
        if !(self.t_start < self.t_end) || !self.torque.is_finite() {
            return Err(Error::invalid("probe window must satisfy t_start < t_end with finite torque"));
        }
        Ok(())
    }

    pub fn active(&self, t: f64) -> bool {
        t >= self.t_start && t < self.t_end
    }

    /// Generalized force vector at time `t`.
    pub fn generalized(&self, t: f64, dof: usize) -> DVector<f64> {
        let mut f = DVector::zeros(dof);
        if self.active(t) {
            f[self.segment_index] = self.torque;
        }
        f
    }
}
