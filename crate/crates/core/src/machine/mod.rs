//! One-axis flux-decay synchronous machine with hydro turbine-governor,
//! static-exciter AVR and multi-band stabilizer.

mod pss;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use pss::{
    make_pss_profile, pss_derivatives, pss_output, BandState, PssBand, PssConfig, PssProfile,
    MAX_PSS_BANDS, RETUNED_GAIN_DIVISOR, RETUNED_INTERMEDIATE_HZ,
};

use crate::error::{GridError, Result};
use crate::units::{BaseSystem, OperatingPoint, Phasor};

/// Speed governor with permanent droop `r` and transient droop compensation.
///
/// The gate reference follows `-(1/r) (1 + s t_r) / (1 + s t_r r_t / r)`
/// applied to speed deviation, then a servo lag `t_g`. Setting `t_r = 0`
/// or `r_t <= r` removes the compensation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Governor {
    pub r: f64,
    pub t_g: f64,
    pub r_t: f64,
    pub t_r: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HydroTurbine {
    /// Water starting time, s.
    pub t_w: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Avr {
    pub k_a: f64,
    pub t_a: f64,
    pub e_fd_min: f64,
    pub e_fd_max: f64,
}

/// Rating-independent machine constants, shared by every plant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MachineConstants {
    pub h: f64,
    pub d: f64,
    pub x_d: f64,
    pub x_d_prime: f64,
    pub t_d0_prime: f64,
    pub governor: Governor,
    pub turbine: HydroTurbine,
    pub avr: Avr,
}

impl Default for MachineConstants {
    fn default() -> Self {
        Self {
            h: 2.5,
            d: 20.0,
            x_d: 1.8,
            x_d_prime: 0.3,
            t_d0_prime: 8.0,
            governor: Governor {
                r: 0.05,
                t_g: 0.5,
                r_t: 0.144,
                t_r: 2.5,
            },
            turbine: HydroTurbine { t_w: 0.5 },
            avr: Avr {
                k_a: 200.0,
                t_a: 0.02,
                e_fd_min: 0.0,
                e_fd_max: 5.0,
            },
        }
    }
}

impl MachineConstants {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(GridError::InvalidParameter(format!("machine: {what}")));
        if !(self.h > 0.0) {
            return bad("H must be positive");
        }
        if !(self.d >= 0.0) {
            return bad("D must be non-negative");
        }
        if !(self.x_d > self.x_d_prime && self.x_d_prime > 0.0) {
            return bad("need x_d > x_d' > 0");
        }
        if !(self.t_d0_prime > 0.0) {
            return bad("T_d0' must be positive");
        }
        let g = &self.governor;
        if !(g.r > 0.0 && g.t_g > 0.0 && g.t_r >= 0.0 && g.r_t >= 0.0) {
            return bad("governor needs R > 0, T_g > 0, T_R >= 0, R_T >= 0");
        }
        if !(self.turbine.t_w > 0.0) {
            return bad("T_w must be positive");
        }
        let a = &self.avr;
        if !(a.k_a > 0.0 && a.t_a > 0.0 && a.e_fd_min < a.e_fd_max) {
            return bad("AVR needs K_A > 0, T_A > 0 and ordered field limits");
        }
        Ok(())
    }

    fn transient_droop(&self) -> Option<(f64, f64)> {
        let g = &self.governor;
        (g.t_r > 0.0 && g.r_t > g.r).then(|| (g.t_r, g.t_r * g.r_t / g.r))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmParams {
    /// MVA
    pub s_rating: f64,
    pub machine: MachineConstants,
    pub pss: PssConfig,
}

impl SmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.s_rating > 0.0) {
            return Err(GridError::InvalidParameter("SM rating must be positive".into()));
        }
        self.machine.validate()?;
        self.pss.validate()
    }
}

pub const SM_STATE_LEN: usize = 7 + 2 * MAX_PSS_BANDS;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SmState {
    /// Rotor angle in the synchronous frame, rad.
    pub delta: f64,
    /// Speed deviation, pu.
    pub d_omega: f64,
    pub e_q_prime: f64,
    pub e_fd: f64,
    /// Gate position, pu.
    pub gate: f64,
    /// Transient-droop compensator state.
    pub gov_comp: f64,
    /// Lagged gate inside the hydro turbine realization.
    pub q_t: f64,
    pub pss: [BandState; MAX_PSS_BANDS],
}

impl SmState {
    pub fn from_slice(x: &[f64]) -> Self {
        let mut pss = [[0.0; 2]; MAX_PSS_BANDS];
        for (k, b) in pss.iter_mut().enumerate() {
            *b = [x[7 + 2 * k], x[8 + 2 * k]];
        }
        Self {
            delta: x[0],
            d_omega: x[1],
            e_q_prime: x[2],
            e_fd: x[3],
            gate: x[4],
            gov_comp: x[5],
            q_t: x[6],
            pss,
        }
    }

    pub fn write_to(&self, x: &mut [f64]) {
        x[..7].copy_from_slice(&[
            self.delta,
            self.d_omega,
            self.e_q_prime,
            self.e_fd,
            self.gate,
            self.gov_comp,
            self.q_t,
        ]);
        for (k, b) in self.pss.iter().enumerate() {
            x[7 + 2 * k] = b[0];
            x[8 + 2 * k] = b[1];
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![0.0; SM_STATE_LEN];
        self.write_to(&mut v);
        v
    }

    /// Internal voltage behind the transient reactance; the q axis lies
    /// along `delta`.
    pub fn emf(&self) -> Phasor {
        Phasor::from_polar(self.e_q_prime, self.delta)
    }

    /// Mechanical frequency, pu.
    pub fn frequency(&self) -> f64 {
        1.0 + self.d_omega
    }

    /// Hydro turbine mechanical power, unit pu. Realizes
    /// `(1 - T_w s) / (1 + 0.5 T_w s)` as `3 q_t - 2 gate`.
    pub fn mechanical_power(&self) -> f64 {
        3.0 * self.q_t - 2.0 * self.gate
    }

    fn is_finite(&self) -> bool {
        self.to_vec().iter().all(|v| v.is_finite())
    }
}

/// Reference values frozen at initialization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmSetpoints {
    pub gate_ref: f64,
    pub v_ref: f64,
}

/// Network quantities seen by the machine, on its own base.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmInputs {
    pub p_e: f64,
    pub v_t: f64,
    pub i_d: f64,
    /// Frequency deviation of the terminal bus voltage, pu. Damping acts on
    /// the slip against it.
    pub bus_d_omega: f64,
}

impl SmInputs {
    /// Evaluates the inputs from the stator current `i` (unit base) and the
    /// terminal voltage.
    pub fn from_network(state: &SmState, i: Phasor, v_t: Phasor) -> Self {
        let e = state.emf();
        // d axis lags q by 90 degrees: project onto exp(j(delta - pi/2))
        let rot = Complex64::new(0.0, 1.0) * Phasor::from_polar(1.0, -state.delta);
        Self {
            p_e: (e * i.conj()).re,
            v_t: v_t.norm(),
            i_d: (i * rot).re,
            bus_d_omega: 0.0,
        }
    }
}

/// Time derivatives of the machine states.
pub fn sm_derivatives(
    state: &SmState,
    inputs: &SmInputs,
    params: &SmParams,
    setpoints: &SmSetpoints,
    base: &BaseSystem,
) -> Result<SmState> {
    if !state.is_finite() || !(inputs.p_e.is_finite() && inputs.v_t.is_finite() && inputs.i_d.is_finite() && inputs.bus_d_omega.is_finite()) {
        return Err(GridError::InvalidParameter("non-finite machine state or input".into()));
    }
    let m = &params.machine;
    let mut d = SmState {
        delta: base.omega_nom() * state.d_omega,
        ..SmState::default()
    };

    let p_m = state.mechanical_power();
    d.d_omega = (p_m - inputs.p_e - m.d * (state.d_omega - inputs.bus_d_omega)) / (2.0 * m.h);

    let u = -state.d_omega / m.governor.r;
    let gov_out = match m.transient_droop() {
        Some((t_r, t_b)) => {
            d.gov_comp = (u - state.gov_comp) / t_b;
            state.gov_comp + t_r / t_b * (u - state.gov_comp)
        }
        None => u,
    };
    d.gate = (setpoints.gate_ref + gov_out - state.gate) / m.governor.t_g;
    d.q_t = (state.gate - state.q_t) / (0.5 * m.turbine.t_w);

    d.e_q_prime = (state.e_fd - state.e_q_prime - (m.x_d - m.x_d_prime) * inputs.i_d) / m.t_d0_prime;

    let u_pss = pss_output(&state.pss, &params.pss);
    let avr = &m.avr;
    let mut de_fd = (avr.k_a * (setpoints.v_ref - inputs.v_t + u_pss) - state.e_fd) / avr.t_a;
    if (state.e_fd >= avr.e_fd_max && de_fd > 0.0) || (state.e_fd <= avr.e_fd_min && de_fd < 0.0) {
        de_fd = 0.0;
    }
    d.e_fd = de_fd;

    pss_derivatives(&state.pss, state.d_omega, &params.pss, &mut d.pss);
    Ok(d)
}

/// Steady state matching a power-flow operating point (unit base).
pub fn init_sm_equilibrium(op: &OperatingPoint, params: &SmParams) -> Result<(SmState, SmSetpoints)> {
    params.validate()?;
    let m = &params.machine;
    let i = op.current();
    let e = op.v + Complex64::new(0.0, m.x_d_prime) * i;
    let delta = e.arg();
    let mut state = SmState {
        delta,
        d_omega: 0.0,
        e_q_prime: e.norm(),
        ..SmState::default()
    };
    let inputs = SmInputs::from_network(&state, i, op.v);
    state.e_fd = state.e_q_prime + (m.x_d - m.x_d_prime) * inputs.i_d;
    if state.e_fd < m.avr.e_fd_min || state.e_fd > m.avr.e_fd_max {
        return Err(GridError::InfeasibleEquilibrium {
            unit: 0,
            reason: format!(
                "field voltage {:.3} pu outside [{}, {}]",
                state.e_fd, m.avr.e_fd_min, m.avr.e_fd_max
            ),
        });
    }
    state.gate = inputs.p_e;
    state.q_t = inputs.p_e;
    let setpoints = SmSetpoints {
        gate_ref: inputs.p_e,
        v_ref: inputs.v_t + state.e_fd / m.avr.k_a,
    };
    Ok((state, setpoints))
}
