//! Grid-forming converter under droop control.
//!
//! The AC side is a voltage source `v_mag ∠ theta` behind the coupling
//! reactance `x_c`. Active power sets the internal frequency through the
//! droop `m_p`, reactive power sets the voltage magnitude through `d_q`,
//! both after a first-order measurement filter. The DC link is a capacitor
//! fed by a current source under proportional voltage control, with a
//! parallel loss conductance.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{GridError, Result};
use crate::units::{BaseSystem, OperatingPoint, Phasor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DcLink {
    /// Capacitor energy time constant, s.
    pub c_dc: f64,
    pub g_dc: f64,
    pub k_dc: f64,
    pub v_dc_ref: f64,
    pub i_dc_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DroopConstants {
    /// Frequency droop, pu frequency per pu power.
    pub m_p: f64,
    /// Power measurement filter cutoff, rad/s.
    pub omega_f: f64,
    /// Voltage droop, pu voltage per pu reactive power.
    pub d_q: f64,
    /// Coupling reactance on the converter rating, pu.
    pub x_c: f64,
    pub dc: DcLink,
}

impl Default for DroopConstants {
    fn default() -> Self {
        Self {
            m_p: 0.05,
            omega_f: 2.0 * std::f64::consts::PI * 5.0,
            d_q: 0.005,
            x_c: 0.02,
            dc: DcLink {
                c_dc: 0.05,
                g_dc: 0.01,
                k_dc: 50.0,
                v_dc_ref: 1.0,
                i_dc_max: 2.0,
            },
        }
    }
}

impl DroopConstants {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(GridError::InvalidParameter(format!("converter: {what}")));
        if !(self.m_p > 0.0) {
            return bad("frequency droop must be positive");
        }
        if !(self.omega_f > 0.0) {
            return bad("filter cutoff must be positive");
        }
        if !(self.x_c > 0.0) {
            return bad("coupling reactance must be positive");
        }
        if !(self.d_q >= 0.0) {
            return bad("voltage droop must be non-negative");
        }
        let dc = &self.dc;
        if !(dc.c_dc > 0.0 && dc.i_dc_max > 0.0 && dc.v_dc_ref > 0.0 && dc.g_dc >= 0.0 && dc.k_dc >= 0.0) {
            return bad("DC link needs c_dc, i_dc_max, v_dc_ref > 0 and g_dc, k_dc >= 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GfcParams {
    /// MVA
    pub s_rating: f64,
    pub control: DroopConstants,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GfcSetpoints {
    pub p_star: f64,
    pub q_star: f64,
    pub v_star: f64,
}

pub const GFC_STATE_LEN: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GfcState {
    /// Internal angle in the synchronous frame, rad.
    pub theta: f64,
    pub p_f: f64,
    pub q_f: f64,
    pub v_dc: f64,
}

impl GfcState {
    pub fn from_slice(x: &[f64]) -> Self {
        Self {
            theta: x[0],
            p_f: x[1],
            q_f: x[2],
            v_dc: x[3],
        }
    }

    pub fn write_to(&self, x: &mut [f64]) {
        x[..GFC_STATE_LEN].copy_from_slice(&[self.theta, self.p_f, self.q_f, self.v_dc]);
    }

    /// Internal frequency commanded by the droop law, pu.
    pub fn frequency(&self, control: &DroopConstants, sp: &GfcSetpoints) -> f64 {
        1.0 + control.m_p * (sp.p_star - self.p_f)
    }

    /// Commanded internal voltage magnitude.
    pub fn v_mag(&self, control: &DroopConstants, sp: &GfcSetpoints) -> f64 {
        sp.v_star + control.d_q * (sp.q_star - self.q_f)
    }

    pub fn emf(&self, control: &DroopConstants, sp: &GfcSetpoints) -> Phasor {
        Phasor::from_polar(self.v_mag(control, sp), self.theta)
    }
}

/// Active and reactive power at the converter terminal, unit base.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GfcInputs {
    pub p: f64,
    pub q: f64,
}

impl GfcInputs {
    pub fn from_network(i: Phasor, v_t: Phasor) -> Self {
        let s = v_t * i.conj();
        Self { p: s.re, q: s.im }
    }
}

/// DC source current under proportional control with power feedforward,
/// clamped to `[0, i_dc_max]`.
pub fn dc_source_current(v_dc: f64, dc: &DcLink, sp: &GfcSetpoints) -> f64 {
    let feedforward = sp.p_star / dc.v_dc_ref;
    (feedforward + dc.k_dc * (dc.v_dc_ref - v_dc)).clamp(0.0, dc.i_dc_max)
}

/// Time derivatives of the converter states. `theta` is measured in the
/// synchronous frame, so its derivative is `omega_nom (omega - 1)`.
pub fn gfc_derivatives(
    state: &GfcState,
    inputs: &GfcInputs,
    params: &GfcParams,
    sp: &GfcSetpoints,
    base: &BaseSystem,
) -> Result<GfcState> {
    if !(state.v_dc > 0.0) {
        return Err(GridError::InvalidParameter(format!(
            "DC-link voltage collapsed to {:.4} pu",
            state.v_dc
        )));
    }
    let c = &params.control;
    let i_dc = dc_source_current(state.v_dc, &c.dc, sp);
    Ok(GfcState {
        theta: base.omega_nom() * (state.frequency(c, sp) - 1.0),
        p_f: c.omega_f * (inputs.p - state.p_f),
        q_f: c.omega_f * (inputs.q - state.q_f),
        v_dc: (i_dc - c.dc.g_dc * state.v_dc - inputs.p / state.v_dc) / c.dc.c_dc,
    })
}

/// DC-link voltage at which the capacitor current balances for a constant
/// AC power `p`, with the DC source unclamped. Larger root of
/// `(k + g) v^2 - (k v_ref + p*/v_ref) v + p = 0`.
pub fn dc_equilibrium(p: f64, dc: &DcLink, sp: &GfcSetpoints) -> Option<f64> {
    let a = dc.k_dc + dc.g_dc;
    let b = dc.k_dc * dc.v_dc_ref + sp.p_star / dc.v_dc_ref;
    let disc = b * b - 4.0 * a * p;
    if a <= 0.0 || disc < 0.0 {
        return None;
    }
    Some((b + disc.sqrt()) / (2.0 * a))
}

pub fn init_gfc_equilibrium(op: &OperatingPoint, params: &GfcParams) -> Result<(GfcState, GfcSetpoints)> {
    let c = &params.control;
    c.validate()?;
    if !(params.s_rating > 0.0) {
        return Err(GridError::InvalidParameter("GFC rating must be positive".into()));
    }
    let i = op.current();
    let e = op.v + Complex64::new(0.0, c.x_c) * i;
    let sp = GfcSetpoints {
        p_star: op.p,
        q_star: op.q,
        v_star: e.norm(),
    };
    let v_dc = dc_equilibrium(op.p, &c.dc, &sp).ok_or_else(|| GridError::InfeasibleEquilibrium {
        unit: 0,
        reason: "no DC-link equilibrium".into(),
    })?;
    let i_dc = sp.p_star / c.dc.v_dc_ref + c.dc.k_dc * (c.dc.v_dc_ref - v_dc);
    if i_dc > c.dc.i_dc_max || i_dc < 0.0 {
        return Err(GridError::InfeasibleEquilibrium {
            unit: 0,
            reason: format!("DC source current {i_dc:.3} pu outside [0, {}]", c.dc.i_dc_max),
        });
    }
    let state = GfcState {
        theta: e.arg(),
        p_f: op.p,
        q_f: op.q,
        v_dc,
    };
    Ok((state, sp))
}
