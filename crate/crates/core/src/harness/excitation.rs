use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExcitationKind {
    Multisine,
    Chirp,
    RampHold,
}

/// Open-loop force profile for data collection. The same scalar force is
/// applied to every segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExcitationProfile {
    pub kind: ExcitationKind,
    /// Peak deviation from `offset`, N.
    pub amplitude: f64,
    /// Constant bias added to the band-limited part, N.
    pub offset: f64,
    /// Hz
    pub band_low: f64,
    /// Hz
    pub band_high: f64,
    /// s
    pub duration: f64,
    pub seed: u64,
    /// Sinusoids in a multisine.
    pub components: usize,
}

impl Default for ExcitationProfile {
    fn default() -> Self {
        Self {
            kind: ExcitationKind::Multisine,
            amplitude: 1.0,
            offset: 1.0,
            band_low: 0.05,
            band_high: 0.6,
            duration: 120.0,
            seed: 7,
            components: 12,
        }
    }
}

impl ExcitationProfile {
    pub fn validate(&self, control_rate: f64) -> Result<()> {
        if !(self.amplitude.is_finite() && self.amplitude >= 0.0) {
            return Err(Error::Config(format!("excitation.amplitude must be non-negative, got {}", self.amplitude)));
        }
        if !self.offset.is_finite() {
            return Err(Error::Config("excitation.offset must be finite".into()));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::Config(format!("excitation.duration must be positive, got {}", self.duration)));
        }
        if !(self.band_low > 0.0 && self.band_low < self.band_high) {
            return Err(Error::invalid(format!(
                "excitation band [{}, {}] Hz must satisfy 0 < low < high",
                self.band_low, self.band_high
            )));
        }
        let nyquist = 0.5 * control_rate;
        if !(self.band_high < nyquist) {
            return Err(Error::invalid(format!(
                "excitation.band_high {} Hz exceeds the Nyquist frequency {} Hz",
                self.band_high, nyquist
            )));
        }
        if self.kind == ExcitationKind::Multisine && self.components == 0 {
            return Err(Error::Config("excitation.components must be at least 1".into()));
        }
        Ok(())
    }
}

/// Force samples at `control_rate` Hz over the profile's duration:
/// `offset + amplitude · s(t)` with `max |s| = 1` (0 for zero amplitude).
pub fn generate_excitation(profile: &ExcitationProfile, control_rate: f64) -> Result<Vec<f64>> {
    profile.validate(control_rate)?;
    let samples = (profile.duration * control_rate).round() as usize;
    if profile.amplitude == 0.0 {
        return Ok(vec![profile.offset; samples]);
    }
    let dt = 1.0 / control_rate;
    let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);
    let (lo, hi) = (profile.band_low, profile.band_high);

    let shape: Vec<f64> = match profile.kind {
        ExcitationKind::Multisine => {
            // Log-spaced frequency bins, one random frequency and phase per bin.
            let k = profile.components;
            let ratio = (hi / lo).ln() / k as f64;
            let tones: Vec<(f64, f64)> = (0..k)
                .map(|i| {
                    let f = lo * (ratio * (i as f64 + rng.random::<f64>())).exp();
                    (f, rng.random_range(0.0..2.0 * PI))
                })
                .collect();
            (0..samples)
                .map(|n| {
                    let t = n as f64 * dt;
                    tones.iter().map(|(f, ph)| (2.0 * PI * f * t + ph).sin()).sum()
                })
                .collect()
        }
        ExcitationKind::Chirp => {
            let rate = (hi - lo) / profile.duration;
            (0..samples)
                .map(|n| {
                    let t = n as f64 * dt;
                    (2.0 * PI * (lo * t + 0.5 * rate * t * t)).sin()
                })
                .collect()
        }
        ExcitationKind::RampHold => {
            // Ramps last half a period of the upper band edge; holds last
            // between that and half a period of the lower edge.
            let ramp = 0.5 / hi;
            let mut out = Vec::with_capacity(samples);
            let mut level = 0.0;
            let mut t_seg = 0.0;
            let mut target: f64 = rng.random_range(-1.0..=1.0);
            let mut hold = rng.random_range(ramp..=0.5 / lo);
            for n in 0..samples {
                let t = n as f64 * dt;
                if t - t_seg >= ramp + hold {
                    level = target;
                    t_seg = t;
                    target = rng.random_range(-1.0..=1.0);
                    hold = rng.random_range(ramp..=0.5 / lo);
                }
                let progress = ((t - t_seg) / ramp).min(1.0);
                // raised-cosine ramp
                let w = 0.5 - 0.5 * (PI * progress).cos();
                out.push(level + (target - level) * w);
            }
            out
        }
    };

    let peak = shape.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if peak > 0.0 { profile.amplitude / peak } else { 0.0 };
    Ok(shape.into_iter().map(|s| profile.offset + scale * s).collect())
}
