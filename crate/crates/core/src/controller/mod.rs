//! The blended control law: GP feed-forward plus a gray-box estimate,
//! discrete PID feedback in output space, and a sigmoid of the predicted
//! variance choosing between them.

mod blend;
mod estimate;
mod law;
mod pid;

pub use blend::{alpha, BlendConfig};
pub use estimate::{EstimatedModel, RigidInverseModel, ZeroModel};
pub use law::{blend_forces, control_law, distribute, feedback, feedforward, BlendedController, ControlOutput};
pub use pid::{Pid, PidConfig, PidState};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Desired output and its first two time derivatives (`ỹ_d`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesiredOutput {
    pub acceleration: DVector<f64>,
    pub velocity: DVector<f64>,
    pub position: DVector<f64>,
}

impl DesiredOutput {
    pub fn new(acceleration: DVector<f64>, velocity: DVector<f64>, position: DVector<f64>) -> Result<Self> {
        let d = Self {
            acceleration,
            velocity,
            position,
        };
        let m = d.position.len();
        if m == 0 || d.velocity.len() != m || d.acceleration.len() != m {
            return Err(Error::invalid("desired output blocks must share one non-zero dimension"));
        }
        if d.as_input().iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("desired output must be finite"));
        }
        Ok(d)
    }

    /// Single-output convenience constructor.
    pub fn scalar(acceleration: f64, velocity: f64, position: f64) -> Self {
        Self {
            acceleration: DVector::from_element(1, acceleration),
            velocity: DVector::from_element(1, velocity),
            position: DVector::from_element(1, position),
        }
    }

    pub fn outputs(&self) -> usize {
        self.position.len()
    }

    /// GP input ordering `[ÿ, ẏ, y]`.
    pub fn as_input(&self) -> Vec<f64> {
        self.acceleration
            .iter()
            .chain(self.velocity.iter())
            .chain(self.position.iter())
            .copied()
            .collect()
    }

    pub fn from_input(input: &[f64]) -> Result<Self> {
        if input.is_empty() || !input.len().is_multiple_of(3) {
            return Err(Error::invalid(format!("GP input length {} is not a multiple of 3", input.len())));
        }
        let m = input.len() / 3;
        Self::new(
            DVector::from_column_slice(&input[..m]),
            DVector::from_column_slice(&input[m..2 * m]),
            DVector::from_column_slice(&input[2 * m..]),
        )
    }
}
