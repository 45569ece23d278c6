//! Multi-band power system stabilizer realized as a sum of second-order
//! band-pass filters acting on rotor speed deviation.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{GridError, Result};

pub const MAX_PSS_BANDS: usize = 3;

/// Centre of the intermediate band after retuning for high converter share, Hz.
pub const RETUNED_INTERMEDIATE_HZ: f64 = 1.2;
/// Gain reduction applied to every band after retuning.
pub const RETUNED_GAIN_DIVISOR: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PssBand {
    /// Hz
    pub f_center: f64,
    /// Output per pu speed deviation at the centre frequency.
    pub gain: f64,
    pub q_factor: f64,
    #[serde(default = "enabled")]
    pub enabled: bool,
}

fn enabled() -> bool {
    true
}

impl PssBand {
    fn omega_c(&self) -> f64 {
        2.0 * PI * self.f_center
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PssConfig {
    pub bands: Vec<PssBand>,
    /// Output limit, pu.
    pub v_pss_max: f64,
}

impl Default for PssConfig {
    fn default() -> Self {
        let band = |f_center, gain| PssBand {
            f_center,
            gain,
            q_factor: 0.7,
            enabled: true,
        };
        Self {
            bands: vec![band(0.2, 2.0), band(0.9, 2.0), band(12.0, 2.0)],
            v_pss_max: 0.1,
        }
    }
}

impl PssConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bands.len() > MAX_PSS_BANDS {
            return Err(GridError::InvalidParameter(format!(
                "at most {MAX_PSS_BANDS} PSS bands, got {}",
                self.bands.len()
            )));
        }
        if !(self.v_pss_max > 0.0) {
            return Err(GridError::InvalidParameter("v_pss_max must be positive".into()));
        }
        for (k, b) in self.bands.iter().enumerate() {
            if !(b.f_center > 0.0) || !(b.q_factor > 0.0) {
                return Err(GridError::InvalidParameter(format!(
                    "PSS band {k} needs positive centre frequency and quality factor"
                )));
            }
        }
        Ok(())
    }

    pub fn enabled_bands(&self) -> impl Iterator<Item = &PssBand> {
        self.bands.iter().filter(|b| b.enabled)
    }

    pub fn is_active(&self) -> bool {
        self.enabled_bands().next().is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PssProfile {
    Original,
    HighPenetration,
    Disabled,
}

impl std::str::FromStr for PssProfile {
    type Err = GridError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "original" => Ok(Self::Original),
            "high_penetration" => Ok(Self::HighPenetration),
            "disabled" => Ok(Self::Disabled),
            other => Err(GridError::Config(format!("unknown PSS profile `{other}`"))),
        }
    }
}

impl std::fmt::Display for PssProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Original => "original",
            Self::HighPenetration => "high_penetration",
            Self::Disabled => "disabled",
        })
    }
}

/// Derives the stabilizer settings for `kind` from the original tuning.
///
/// The high-penetration retune moves the intermediate band to 1.2 Hz, drops
/// the high-frequency band and divides every gain by five.
pub fn make_pss_profile(kind: PssProfile, original: &PssConfig) -> PssConfig {
    let mut cfg = original.clone();
    match kind {
        PssProfile::Original => {}
        PssProfile::HighPenetration => {
            if let Some(b) = cfg.bands.get_mut(1) {
                b.f_center = RETUNED_INTERMEDIATE_HZ;
            }
            if let Some(b) = cfg.bands.get_mut(2) {
                b.enabled = false;
            }
            for b in &mut cfg.bands {
                b.gain /= RETUNED_GAIN_DIVISOR;
            }
        }
        PssProfile::Disabled => {
            for b in &mut cfg.bands {
                b.enabled = false;
            }
        }
    }
    cfg
}

/// Filter states of one band: `[x, dx/dt]` of the canonical realization.
pub type BandState = [f64; 2];

/// Stabilizing signal from the current filter states, clamped to
/// `±v_pss_max`.
pub fn pss_output(states: &[BandState], config: &PssConfig) -> f64 {
    let raw: f64 = config
        .bands
        .iter()
        .zip(states)
        .filter(|(b, _)| b.enabled)
        .map(|(b, x)| b.gain * b.omega_c() / b.q_factor * x[1])
        .sum();
    raw.clamp(-config.v_pss_max, config.v_pss_max)
}

/// Band filter state derivatives driven by speed deviation `d_omega`.
/// Disabled bands are frozen.
pub fn pss_derivatives(states: &[BandState], d_omega: f64, config: &PssConfig, out: &mut [BandState]) {
    for (k, x) in states.iter().enumerate() {
        out[k] = match config.bands.get(k) {
            Some(b) if b.enabled => {
                let wc = b.omega_c();
                [x[1], -wc * wc * x[0] - wc / b.q_factor * x[1] + d_omega]
            }
            _ => [0.0, 0.0],
        };
    }
}
