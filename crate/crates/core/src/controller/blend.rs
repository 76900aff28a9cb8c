use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const NOISE_FLOOR: f64 = 1e-12;

/// Sigmoid gate `α = sig(c1 · max_i var_i + c2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlendConfig {
    /// 1/variance units; must be positive so more variance means more feedback.
    pub c1: f64,
    pub c2: f64,
}

impl BlendConfig {
    pub fn new(c1: f64, c2: f64) -> Result<Self> {
        let cfg = Self { c1, c2 };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `c1 = 10/σ_f²`, `c2 = −5`: α ≈ 0.007 at zero variance, ≈ 0.993 at
    /// the prior variance.
    pub fn normalized(signal_variance: f64) -> Result<Self> {
        Self::new(10.0 / signal_variance, -5.0)
    }

    /// `c1 = 1/σ_n²`, `c2 = −5`: α crosses ½ where the latent variance is
    /// five times the learned noise variance. At any training input the
    /// latent variance is below `σ_n²`, so α stays under `sig(−4) ≈ 0.018`
    /// on the data, and it tends to 1 once the variance approaches the prior.
    pub fn relative_to_noise(noise_variance: f64) -> Result<Self> {
        Self::new(1.0 / noise_variance.max(NOISE_FLOOR), -5.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c1.is_finite() && self.c1 > 0.0) {
            return Err(Error::Config(format!("blend.c1 must be positive, got {}", self.c1)));
        }
        if !self.c2.is_finite() {
            return Err(Error::Config(format!("blend.c2 must be finite, got {}", self.c2)));
        }
        Ok(())
    }
}

/// Feedback weight in `[0, 1]` from the per-output predicted variances,
/// aggregated by their maximum.
pub fn alpha(variances: &DVector<f64>, cfg: &BlendConfig) -> f64 {
    let worst = variances.iter().copied().fold(0.0f64, f64::max);
    1.0 / (1.0 + (-(cfg.c1 * worst + cfg.c2)).exp())
}
