use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::controller::DesiredOutput;
use crate::error::{Error, Result};

/// `y_d(t) = offset + amplitude · sin(2π f t)` with closed-form derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceSpec {
    /// rad
    pub offset: f64,
    /// rad
    pub amplitude: f64,
    /// Hz
    pub frequency: f64,
}

impl Default for ReferenceSpec {
    fn default() -> Self {
        Self {
            offset: 0.4,
            amplitude: 0.2,
            frequency: 0.2,
        }
    }
}

impl ReferenceSpec {
    pub fn constant(position: f64) -> Self {
        Self {
            offset: position,
            amplitude: 0.0,
            frequency: 1.0,
        }
    }

    /// The same sinusoid reflected through `y = 0`.
    pub fn mirrored(&self) -> Self {
        Self {
            offset: -self.offset,
            amplitude: -self.amplitude,
            ..*self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.offset.is_finite() && self.amplitude.is_finite()) {
            return Err(Error::Config("reference offset and amplitude must be finite".into()));
        }
        if !(self.frequency.is_finite() && self.frequency > 0.0) {
            return Err(Error::Config(format!("reference frequency must be positive, got {}", self.frequency)));
        }
        Ok(())
    }

    pub fn at(&self, t: f64) -> DesiredOutput {
        let w = 2.0 * PI * self.frequency;
        let (s, c) = (w * t).sin_cos();
        DesiredOutput::scalar(
            -self.amplitude * w * w * s,
            self.amplitude * w * c,
            self.offset + self.amplitude * s,
        )
    }
}
