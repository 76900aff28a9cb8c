use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Discrete PID gains and limits, shared by every output channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PidConfig {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Controller period, s.
    pub dt: f64,
    /// Bound on `|∫e dt|` per channel.
    pub integral_limit: f64,
    /// Bound on `|u|` per channel.
    pub output_limit: f64,
}

impl Default for PidConfig {
    fn default() -> Self {
        Self {
            kp: 50.0,
            ki: 250.0,
            kd: 0.0,
            dt: 1e-3,
            integral_limit: 1.0,
            output_limit: 50.0,
        }
    }
}

impl PidConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("pid.kp", self.kp), ("pid.ki", self.ki), ("pid.kd", self.kd)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be non-negative, got {v}")));
            }
        }
        for (name, v) in [
            ("pid.dt", self.dt),
            ("pid.integral_limit", self.integral_limit),
            ("pid.output_limit", self.output_limit),
        ] {
            if !(v > 0.0) || v.is_nan() {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PidState {
    pub integral: DVector<f64>,
    pub prev_error: Option<DVector<f64>>,
}

impl PidState {
    pub fn new(channels: usize) -> Self {
        Self {
            integral: DVector::zeros(channels),
            prev_error: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pid {
    pub config: PidConfig,
    pub state: PidState,
}

impl Pid {
    pub fn new(config: PidConfig, channels: usize) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            state: PidState::new(channels),
        })
    }

    pub fn reset(&mut self) {
        self.state = PidState::new(self.state.integral.len());
    }

    /// Advances the controller by `dt` and returns the output-space command.
    /// The derivative term is zero on the first update.
    pub fn update(&mut self, error: &DVector<f64>, dt: f64) -> Result<DVector<f64>> {
        if !(dt > 0.0) {
            return Err(Error::invalid(format!("controller period must be positive, got {dt}")));
        }
        if error.len() != self.state.integral.len() {
            return Err(Error::invalid(format!(
                "error has {} channels, controller has {}",
                error.len(),
                self.state.integral.len()
            )));
        }
        let c = &self.config;
        let lim = c.integral_limit;
        for (i, e) in self.state.integral.iter_mut().zip(error.iter()) {
            *i = (*i + e * dt).clamp(-lim, lim);
        }
        let mut u = error * c.kp + &self.state.integral * c.ki;
        if let Some(prev) = &self.state.prev_error {
            if c.kd != 0.0 {
                u += (error - prev) * (c.kd / dt);
            }
        }
        self.state.prev_error = Some(error.clone());
        Ok(u.map(|v| v.clamp(-c.output_limit, c.output_limit)))
    }
}
