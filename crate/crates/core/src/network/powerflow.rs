use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{NetworkModel, Ybus};
use crate::error::{GridError, Result};
use crate::units::{BaseSystem, Phasor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenDispatch {
    pub bus: usize,
    /// Active power setpoint, system pu.
    pub p: f64,
    /// Terminal voltage magnitude setpoint, pu.
    pub v_set: f64,
}

/// Generator setpoints for the power flow. Exactly one entry is the slack.
#[derive(Debug, Clone, PartialEq)]
pub struct Dispatch {
    pub generators: Vec<GenDispatch>,
    pub slack: usize,
}

impl Dispatch {
    /// Dispatch as listed in the network's generator sites.
    pub fn from_network(net: &NetworkModel, base: &BaseSystem) -> Result<Self> {
        let slack = net
            .generators
            .iter()
            .position(|g| g.slack)
            .ok_or_else(|| GridError::InvalidTopology("no slack generator".into()))?;
        Ok(Self {
            generators: net
                .generators
                .iter()
                .map(|g| GenDispatch {
                    bus: g.bus,
                    p: base.mw_to_pu(g.p_dispatch),
                    v_set: g.v_set,
                })
                .collect(),
            slack,
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PowerFlowOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub v_min: f64,
    pub v_max: f64,
}

impl Default for PowerFlowOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 50,
            v_min: 0.8,
            v_max: 1.2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PowerFlowSolution {
    pub bus_ids: Vec<usize>,
    /// Bus voltages, pu, in bus-list order.
    pub v: Vec<Phasor>,
    /// Injected generator power per dispatch entry, system pu.
    pub gen_p: Vec<f64>,
    pub gen_q: Vec<f64>,
    /// HVDC injection used in the solve, system pu.
    pub hvdc_p: f64,
    /// Infinity norm of the final power mismatch, system pu.
    pub residual: f64,
    pub iterations: usize,
}

impl PowerFlowSolution {
    pub fn voltage_at(&self, bus: usize) -> Option<Phasor> {
        self.bus_ids.iter().position(|&b| b == bus).map(|k| self.v[k])
    }
}

#[derive(Clone, Copy, PartialEq)]
enum BusKind {
    Slack,
    Pv,
    Pq,
}

/// Newton-Raphson power flow in polar coordinates from a flat start.
///
/// Loads are already part of `ybus` as constant impedances. The HVDC link,
/// when active, is a constant active-power injection with unity power factor.
pub fn solve_power_flow(
    net: &NetworkModel,
    ybus: &Ybus,
    dispatch: &Dispatch,
    base: &BaseSystem,
    opts: &PowerFlowOptions,
) -> Result<PowerFlowSolution> {
    let n = ybus.len();
    let y = &ybus.matrix;
    let mut kind = vec![BusKind::Pq; n];
    let mut p_spec = vec![0.0; n];
    let q_spec = vec![0.0; n];
    let mut vmag = vec![1.0; n];
    let mut theta = vec![0.0; n];

    let mut gen_index = Vec::with_capacity(dispatch.generators.len());
    for (k, g) in dispatch.generators.iter().enumerate() {
        let i = ybus
            .index_of(g.bus)
            .ok_or_else(|| GridError::InvalidTopology(format!("generator at unknown bus {}", g.bus)))?;
        kind[i] = if k == dispatch.slack { BusKind::Slack } else { BusKind::Pv };
        p_spec[i] += g.p;
        vmag[i] = g.v_set;
        gen_index.push(i);
    }
    let hvdc_p = match &net.hvdc {
        Some(h) if h.active => {
            let i = ybus
                .index_of(h.bus)
                .ok_or_else(|| GridError::InvalidTopology(format!("hvdc at unknown bus {}", h.bus)))?;
            let p = base.mw_to_pu(h.p_inject);
            p_spec[i] += p;
            p
        }
        _ => 0.0,
    };

    // unknown ordering: angles of non-slack buses, then magnitudes of PQ buses
    let ang: Vec<usize> = (0..n).filter(|&i| kind[i] != BusKind::Slack).collect();
    let mag: Vec<usize> = (0..n).filter(|&i| kind[i] == BusKind::Pq).collect();
    let m = ang.len() + mag.len();

    let phasors = |vmag: &[f64], theta: &[f64]| -> DVector<Complex64> {
        DVector::from_iterator(n, (0..n).map(|i| Phasor::from_polar(vmag[i], theta[i])))
    };
    let mismatch = |v: &DVector<Complex64>| -> (DVector<f64>, DVector<Complex64>) {
        let current = y * v;
        let s = v.component_mul(&current.map(|c| c.conj()));
        let mut f = DVector::zeros(m);
        for (r, &i) in ang.iter().enumerate() {
            f[r] = p_spec[i] - s[i].re;
        }
        for (r, &i) in mag.iter().enumerate() {
            f[ang.len() + r] = q_spec[i] - s[i].im;
        }
        (f, current)
    };

    let mut iterations = 0;
    let mut v = phasors(&vmag, &theta);
    let (mut f, mut current) = mismatch(&v);
    let mut residual = f.amax();
    while residual > opts.tolerance {
        if iterations >= opts.max_iterations || !residual.is_finite() {
            return Err(GridError::PowerFlowDiverged {
                iterations,
                mismatch: residual,
            });
        }
        // dS/dtheta = j diag(V) conj(diag(I) - Y diag(V))
        // dS/d|V|   = diag(V) conj(Y diag(V/|V|)) + conj(diag(I)) diag(V/|V|)
        let mut jac = DMatrix::<f64>::zeros(m, m);
        let vn: Vec<Complex64> = v.iter().map(|c| c / c.norm()).collect();
        let j = Complex64::new(0.0, 1.0);
        let ds_dtheta = |i: usize, k: usize| -> Complex64 {
            let diag = if i == k { current[i].conj() } else { Complex64::new(0.0, 0.0) };
            j * v[i] * (diag - (y[(i, k)] * v[k]).conj())
        };
        let ds_dvm = |i: usize, k: usize| -> Complex64 {
            let mut d = v[i] * (y[(i, k)] * vn[k]).conj();
            if i == k {
                d += current[i].conj() * vn[i];
            }
            d
        };
        for (r, &i) in ang.iter().enumerate() {
            for (c, &k) in ang.iter().enumerate() {
                jac[(r, c)] = ds_dtheta(i, k).re;
            }
            for (c, &k) in mag.iter().enumerate() {
                jac[(r, ang.len() + c)] = ds_dvm(i, k).re;
            }
        }
        for (r, &i) in mag.iter().enumerate() {
            for (c, &k) in ang.iter().enumerate() {
                jac[(ang.len() + r, c)] = ds_dtheta(i, k).im;
            }
            for (c, &k) in mag.iter().enumerate() {
                jac[(ang.len() + r, ang.len() + c)] = ds_dvm(i, k).im;
            }
        }
        let dx = jac
            .lu()
            .solve(&f)
            .ok_or_else(|| GridError::SingularNetwork("power-flow Jacobian".into()))?;
        for (r, &i) in ang.iter().enumerate() {
            theta[i] += dx[r];
        }
        for (r, &i) in mag.iter().enumerate() {
            vmag[i] += dx[ang.len() + r];
        }
        iterations += 1;
        v = phasors(&vmag, &theta);
        (f, current) = mismatch(&v);
        residual = f.amax();
    }

    for (i, vm) in vmag.iter().enumerate() {
        if *vm < opts.v_min || *vm > opts.v_max {
            return Err(GridError::VoltageOutOfRange {
                bus: ybus.bus_ids[i],
                vmag: *vm,
            });
        }
    }

    let s = v.component_mul(&current.map(|c| c.conj()));
    let gen_p = gen_index
        .iter()
        .enumerate()
        .map(|(k, &i)| if k == dispatch.slack { s[i].re - (p_spec[i] - dispatch.generators[k].p) } else { dispatch.generators[k].p })
        .collect();
    let gen_q = gen_index.iter().map(|&i| s[i].im - q_spec[i]).collect();

    Ok(PowerFlowSolution {
        bus_ids: ybus.bus_ids.clone(),
        v: v.iter().copied().collect(),
        gen_p,
        gen_q,
        hvdc_p,
        residual,
        iterations,
    })
}
