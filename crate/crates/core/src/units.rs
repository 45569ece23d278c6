//! Per-unit bases and phasor helpers.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{GridError, Result};

/// Complex RMS phasor in per unit.
pub type Phasor = Complex64;

/// Nominal frequency and apparent-power base shared by the whole network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseSystem {
    /// Nominal frequency, Hz.
    pub f_nom: f64,
    /// System apparent-power base, MVA.
    pub s_base: f64,
}

impl Default for BaseSystem {
    fn default() -> Self {
        Self {
            f_nom: 60.0,
            s_base: 1000.0,
        }
    }
}

impl BaseSystem {
    pub fn new(f_nom: f64, s_base: f64) -> Result<Self> {
        let base = Self { f_nom, s_base };
        base.validate()?;
        Ok(base)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f_nom > 0.0 && self.f_nom.is_finite()) {
            return Err(GridError::InvalidParameter(format!(
                "f_nom must be positive, got {}",
                self.f_nom
            )));
        }
        if !(self.s_base > 0.0 && self.s_base.is_finite()) {
            return Err(GridError::InvalidParameter(format!(
                "s_base must be positive, got {}",
                self.s_base
            )));
        }
        Ok(())
    }

    /// Nominal angular frequency, rad/s.
    pub fn omega_nom(&self) -> f64 {
        2.0 * PI * self.f_nom
    }

    /// Impedance base in ohms for a bus of nominal line-to-line voltage `v_kv`.
    pub fn z_base(&self, v_kv: f64) -> f64 {
        v_kv * v_kv / self.s_base
    }

    /// Ratio converting a quantity on the `s_unit` base to the system base.
    pub fn unit_to_system(&self, s_unit: f64) -> f64 {
        s_unit / self.s_base
    }

    /// Megawatts to system per unit.
    pub fn mw_to_pu(&self, mw: f64) -> f64 {
        mw / self.s_base
    }

    pub fn pu_to_mw(&self, pu: f64) -> f64 {
        pu * self.s_base
    }
}

fn check_rating(s_unit: f64) -> Result<()> {
    if s_unit > 0.0 && s_unit.is_finite() {
        Ok(())
    } else {
        Err(GridError::InvalidParameter(format!(
            "unit rating must be positive, got {s_unit}"
        )))
    }
}

/// Converts a power expressed on a unit's own rating to the system base.
pub fn to_system_base(p_unit_pu: f64, s_unit: f64, base: &BaseSystem) -> Result<f64> {
    check_rating(s_unit)?;
    Ok(p_unit_pu * s_unit / base.s_base)
}

/// Inverse of [`to_system_base`].
pub fn from_system_base(p_sys_pu: f64, s_unit: f64, base: &BaseSystem) -> Result<f64> {
    check_rating(s_unit)?;
    Ok(p_sys_pu * base.s_base / s_unit)
}

/// Steady operating point of a device on its own rating: terminal voltage
/// and injected active/reactive power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub v: Phasor,
    pub p: f64,
    pub q: f64,
}

impl OperatingPoint {
    /// Injected current in unit-base pu.
    pub fn current(&self) -> Phasor {
        (Phasor::new(self.p, self.q) / self.v).conj()
    }
}

/// Unit phasor at angle `theta` scaled by `mag`.
pub fn polar(mag: f64, theta: f64) -> Phasor {
    Phasor::from_polar(mag, theta)
}
