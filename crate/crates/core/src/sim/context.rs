use nalgebra::DVector;
use num_complex::Complex64;

use super::{DeviceKind, DeviceTrace, Event, EventKind, Scenario};
use crate::converter::{
    gfc_derivatives, init_gfc_equilibrium, GfcInputs, GfcParams, GfcSetpoints, GfcState, GFC_STATE_LEN,
};
use crate::error::{GridError, Result};
use crate::machine::{init_sm_equilibrium, sm_derivatives, SmInputs, SmParams, SmSetpoints, SmState, SM_STATE_LEN};
use crate::network::{
    build_ybus, line_admittances, solve_power_flow, Dispatch, GenDispatch, LineAdmittance, NetworkModel,
    NetworkSolution, NetworkSolver, PowerFlowOptions, PowerFlowSolution, SourceBranch, Ybus,
};
use crate::transition::GenUnit;
use crate::units::{BaseSystem, OperatingPoint, Phasor};

#[derive(Debug, Clone)]
pub enum DeviceModel {
    Sm { params: SmParams, setpoints: SmSetpoints },
    Gfc { params: GfcParams, setpoints: GfcSetpoints },
}

/// One dynamic device connected to the network through its coupling
/// reactance.
#[derive(Debug, Clone)]
pub struct Device {
    pub unit_id: usize,
    /// Bus matrix index.
    pub bus: usize,
    pub model: DeviceModel,
    /// Index into the trajectory's device list.
    pub trace: usize,
}

impl Device {
    pub fn kind(&self) -> DeviceKind {
        match self.model {
            DeviceModel::Sm { .. } => DeviceKind::Sm,
            DeviceModel::Gfc { .. } => DeviceKind::Gfc,
        }
    }

    pub fn state_len(&self) -> usize {
        match self.model {
            DeviceModel::Sm { .. } => SM_STATE_LEN,
            DeviceModel::Gfc { .. } => GFC_STATE_LEN,
        }
    }

    pub fn s_rating(&self) -> f64 {
        match &self.model {
            DeviceModel::Sm { params, .. } => params.s_rating,
            DeviceModel::Gfc { params, .. } => params.s_rating,
        }
    }

    /// Coupling reactance on the device rating.
    fn x_unit(&self) -> f64 {
        match &self.model {
            DeviceModel::Sm { params, .. } => params.machine.x_d_prime,
            DeviceModel::Gfc { params, .. } => params.control.x_c,
        }
    }

    fn branch(&self, base: &BaseSystem) -> SourceBranch {
        SourceBranch::reactance(self.bus, self.x_unit() * base.s_base / self.s_rating())
    }

    pub fn emf(&self, x: &[f64]) -> Phasor {
        match &self.model {
            DeviceModel::Sm { .. } => SmState::from_slice(x).emf(),
            DeviceModel::Gfc { params, setpoints } => GfcState::from_slice(x).emf(&params.control, setpoints),
        }
    }

    /// Rotor or internal angle in the synchronous frame, rad.
    pub fn angle(&self, x: &[f64]) -> f64 {
        match &self.model {
            DeviceModel::Sm { .. } => SmState::from_slice(x).delta,
            DeviceModel::Gfc { .. } => GfcState::from_slice(x).theta,
        }
    }

    /// SM mechanical or GFC internal frequency, pu.
    pub fn frequency(&self, x: &[f64]) -> f64 {
        match &self.model {
            DeviceModel::Sm { .. } => SmState::from_slice(x).frequency(),
            DeviceModel::Gfc { params, setpoints } => GfcState::from_slice(x).frequency(&params.control, setpoints),
        }
    }

    /// Time derivative of the internal voltage given the state derivative.
    pub fn emf_rate(&self, x: &[f64], dx: &[f64]) -> Phasor {
        let j = Complex64::new(0.0, 1.0);
        match &self.model {
            DeviceModel::Sm { .. } => {
                let (s, ds) = (SmState::from_slice(x), SmState::from_slice(dx));
                (ds.e_q_prime + j * s.e_q_prime * ds.delta) * Phasor::from_polar(1.0, s.delta)
            }
            DeviceModel::Gfc { params, setpoints } => {
                let (s, ds) = (GfcState::from_slice(x), GfcState::from_slice(dx));
                let dv = -params.control.d_q * ds.q_f;
                (dv + j * s.v_mag(&params.control, setpoints) * ds.theta) * Phasor::from_polar(1.0, s.theta)
            }
        }
    }

    fn damped(&self) -> bool {
        matches!(&self.model, DeviceModel::Sm { params, .. } if params.machine.d != 0.0)
    }

    /// Writes the state derivatives given the device current (system pu),
    /// terminal voltage and terminal frequency deviation.
    pub fn derivatives(
        &self,
        x: &[f64],
        i_sys: Phasor,
        v_t: Phasor,
        bus_d_omega: f64,
        base: &BaseSystem,
        out: &mut [f64],
    ) -> Result<()> {
        let i = i_sys * base.s_base / self.s_rating();
        match &self.model {
            DeviceModel::Sm { params, setpoints } => {
                let s = SmState::from_slice(x);
                let inputs = SmInputs {
                    bus_d_omega,
                    ..SmInputs::from_network(&s, i, v_t)
                };
                sm_derivatives(&s, &inputs, params, setpoints, base)?.write_to(out);
            }
            DeviceModel::Gfc { params, setpoints } => {
                let s = GfcState::from_slice(x);
                let inputs = GfcInputs::from_network(i, v_t);
                gfc_derivatives(&s, &inputs, params, setpoints, base)?.write_to(out);
            }
        }
        Ok(())
    }
}

/// Everything one simulation run mutates: devices, their stacked states and
/// the factorized network.
#[derive(Debug, Clone)]
pub struct SimContext {
    pub base: BaseSystem,
    pub network: NetworkModel,
    pub ybus: Ybus,
    pub lines: Vec<LineAdmittance>,
    pub units: Vec<GenUnit>,
    pub devices: Vec<Device>,
    pub offsets: Vec<usize>,
    pub state: Vec<f64>,
    pub solver: NetworkSolver,
    pub power_flow: PowerFlowSolution,
    /// Constant HVDC current injection and its bus index, while connected.
    /// The phasor is held fixed relative to the reference angle.
    pub hvdc: Option<(usize, Complex64)>,
    /// Added to the rating-weighted mean device angle so that the reference
    /// starts at zero and stays continuous when devices are removed.
    pub reference_offset: f64,
    pub tripped_units: Vec<usize>,
    /// Skeleton of the trajectory traces, one per device at assembly.
    pub traces: Vec<DeviceTrace>,
}

/// What an event removed from the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventOutcome {
    /// Dispatch lost, MW.
    pub removed_mw: f64,
}

fn layout(devices: &[Device]) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(devices.len() + 1);
    let mut off = 0;
    offsets.push(0);
    for d in devices {
        off += d.state_len();
        offsets.push(off);
    }
    offsets
}

fn make_solver(
    ybus: &Ybus,
    devices: &[Device],
    hvdc: Option<(usize, Complex64)>,
    base: &BaseSystem,
) -> Result<NetworkSolver> {
    let mut inj = DVector::zeros(ybus.len());
    if let Some((bus, i)) = hvdc {
        inj[bus] += i;
    }
    let sources = devices.iter().map(|d| d.branch(base)).collect();
    NetworkSolver::new(ybus, sources, inj)
}

impl SimContext {
    fn build_solver(&self) -> Result<NetworkSolver> {
        make_solver(&self.ybus, &self.devices, self.hvdc, &self.base)
    }

    pub fn device_states<'a>(&'a self, x: &'a [f64]) -> impl Iterator<Item = (&'a Device, &'a [f64])> + 'a {
        self.devices
            .iter()
            .enumerate()
            .map(move |(k, d)| (d, &x[self.offsets[k]..self.offsets[k + 1]]))
    }

    fn mean_angle(&self, x: &[f64]) -> f64 {
        let (sum, weight) = self
            .device_states(x)
            .fold((0.0, 0.0), |(a, w), (d, s)| (a + d.s_rating() * d.angle(s), w + d.s_rating()));
        sum / weight
    }

    /// Angle the HVDC current is referred to: the rating-weighted mean of
    /// all device angles, shifted to start at zero.
    pub fn reference_angle(&self, x: &[f64]) -> f64 {
        self.mean_angle(x) + self.reference_offset
    }

    pub fn solve_network(&self, x: &[f64]) -> Result<NetworkSolution> {
        let emf: Vec<Phasor> = self.device_states(x).map(|(d, s)| d.emf(s)).collect();
        self.solver.solve(&emf, Phasor::from_polar(1.0, self.reference_angle(x)))
    }

    /// Full state derivative with the algebraic network solved for `x`.
    ///
    /// Machine damping needs the terminal bus frequency, which follows from
    /// the internal voltage rates through the same network. Those rates do
    /// not depend on the speed derivative, so damped machines are simply
    /// evaluated a second time.
    pub fn derivatives(&self, x: &[f64], out: &mut [f64]) -> Result<NetworkSolution> {
        let sol = self.solve_network(x)?;
        for (k, d) in self.devices.iter().enumerate() {
            let (a, b) = (self.offsets[k], self.offsets[k + 1]);
            d.derivatives(&x[a..b], sol.source_currents[k], sol.v[d.bus], 0.0, &self.base, &mut out[a..b])?;
        }
        if self.devices.iter().any(Device::damped) {
            let rates: Vec<Phasor> = self
                .devices
                .iter()
                .enumerate()
                .map(|(k, d)| {
                    let (a, b) = (self.offsets[k], self.offsets[k + 1]);
                    d.emf_rate(&x[a..b], &out[a..b])
                })
                .collect();
            let weight: f64 = self.devices.iter().map(Device::s_rating).sum();
            let reference_rate = self
                .devices
                .iter()
                .enumerate()
                .map(|(k, d)| {
                    let (a, b) = (self.offsets[k], self.offsets[k + 1]);
                    d.s_rating() * d.angle(&out[a..b])
                })
                .sum::<f64>()
                / weight;
            let rotation_rate = Complex64::new(0.0, reference_rate) * sol.injection_rotation;
            let dv = self.solver.voltage_rate(&rates, rotation_rate)?;
            for (k, d) in self.devices.iter().enumerate().filter(|(_, d)| d.damped()) {
                let (a, b) = (self.offsets[k], self.offsets[k + 1]);
                let bus_d_omega = (dv[d.bus] / sol.v[d.bus]).im / self.base.omega_nom();
                d.derivatives(
                    &x[a..b],
                    sol.source_currents[k],
                    sol.v[d.bus],
                    bus_d_omega,
                    &self.base,
                    &mut out[a..b],
                )?;
            }
        }
        Ok(sol)
    }

    pub fn derivative_norm(&self) -> Result<f64> {
        let mut dx = vec![0.0; self.state.len()];
        self.derivatives(&self.state, &mut dx)?;
        Ok(dx.iter().fold(0.0, |a, v| a.max(v.abs())))
    }

    /// Active-power balance residual: generation + HVDC − load − line losses.
    pub fn balance_residual(&self, sol: &NetworkSolution) -> f64 {
        let gen: f64 = self
            .devices
            .iter()
            .zip(&sol.source_currents)
            .map(|(d, i)| (sol.v[d.bus] * i.conj()).re)
            .sum();
        let hvdc = self
            .hvdc
            .map_or(0.0, |(bus, i)| (sol.v[bus] * (i * sol.injection_rotation).conj()).re);
        let index = self.network.bus_index();
        let base = &self.base;
        let load: f64 = self
            .network
            .loads
            .iter()
            .map(|l| {
                let k = index[&l.bus];
                l.p_nom / base.s_base * sol.v[k].norm_sqr()
            })
            .sum();
        let losses: f64 = self
            .lines
            .iter()
            .map(|la| la.series.re * (sol.v[la.from] - sol.v[la.to]).norm_sqr())
            .sum();
        gen + hvdc - load - losses
    }

    pub fn device_count(&self, kind: DeviceKind) -> usize {
        self.devices.iter().filter(|d| d.kind() == kind).count()
    }
}

/// Solves the initial power flow for the units' dispatch and places every
/// device at its equilibrium. Devices with zero rating are left out.
pub fn assemble_system(
    net: &NetworkModel,
    base: &BaseSystem,
    units: &[GenUnit],
    scenario: &Scenario,
) -> Result<SimContext> {
    scenario.validate()?;
    base.validate()?;
    let ybus = build_ybus(net, base)?;
    let lines = line_admittances(net, base)?;
    let slack = units
        .iter()
        .position(|u| u.slack)
        .ok_or_else(|| GridError::InvalidTopology("no slack unit".into()))?;
    let dispatch = Dispatch {
        generators: units
            .iter()
            .map(|u| GenDispatch {
                bus: u.bus,
                p: base.mw_to_pu(u.p0),
                v_set: u.v_set,
            })
            .collect(),
        slack,
    };
    let pf = solve_power_flow(net, &ybus, &dispatch, base, &PowerFlowOptions::default())?;

    let mut devices = Vec::new();
    let mut state = Vec::new();
    let mut traces = Vec::new();
    for (k, u) in units.iter().enumerate() {
        let bus = ybus
            .index_of(u.bus)
            .ok_or_else(|| GridError::InvalidTopology(format!("unit {} at unknown bus {}", u.id, u.bus)))?;
        // both halves of a unit run at the same loading on their own rating
        let s_sys = Complex64::new(pf.gen_p[k], pf.gen_q[k]);
        let s_unit = s_sys * base.s_base / u.s_sm0;
        let op = OperatingPoint {
            v: pf.v[bus],
            p: s_unit.re,
            q: s_unit.im,
        };
        let tag = |e: GridError| match e {
            GridError::InfeasibleEquilibrium { reason, .. } => GridError::InfeasibleEquilibrium { unit: u.id, reason },
            other => other,
        };
        if u.s_sm > 0.0 {
            let params = SmParams {
                s_rating: u.s_sm,
                machine: u.machine,
                pss: scenario.pss.clone(),
            };
            let (s, setpoints) = init_sm_equilibrium(&op, &params).map_err(tag)?;
            state.extend(s.to_vec());
            traces.push(DeviceTrace {
                unit_id: u.id,
                kind: DeviceKind::Sm,
                freq: vec![],
                p: vec![],
                vmag: vec![],
            });
            devices.push(Device {
                unit_id: u.id,
                bus,
                model: DeviceModel::Sm { params, setpoints },
                trace: traces.len() - 1,
            });
        }
        if u.s_gfc > 0.0 {
            let params = GfcParams {
                s_rating: u.s_gfc,
                control: u.converter,
            };
            let (s, setpoints) = init_gfc_equilibrium(&op, &params).map_err(tag)?;
            let mut x = [0.0; GFC_STATE_LEN];
            s.write_to(&mut x);
            state.extend(x);
            traces.push(DeviceTrace {
                unit_id: u.id,
                kind: DeviceKind::Gfc,
                freq: vec![],
                p: vec![],
                vmag: vec![],
            });
            devices.push(Device {
                unit_id: u.id,
                bus,
                model: DeviceModel::Gfc { params, setpoints },
                trace: traces.len() - 1,
            });
        }
    }

    let hvdc = match &net.hvdc {
        Some(h) if h.active => {
            let bus = ybus.index_of(h.bus).expect("validated hvdc bus");
            let s = Complex64::new(pf.hvdc_p, 0.0);
            Some((bus, (s / pf.v[bus]).conj()))
        }
        _ => None,
    };

    let offsets = layout(&devices);
    let solver = make_solver(&ybus, &devices, hvdc, base)?;
    let mut ctx = SimContext {
        base: *base,
        network: net.clone(),
        ybus,
        lines,
        units: units.to_vec(),
        devices,
        offsets,
        state,
        solver,
        power_flow: pf,
        hvdc,
        reference_offset: 0.0,
        tripped_units: Vec::new(),
        traces,
    };
    ctx.reference_offset = -ctx.mean_angle(&ctx.state);
    Ok(ctx)
}

/// Applies a contingency between integration steps and refactorizes the
/// network.
pub fn apply_event(ctx: &mut SimContext, event: &Event) -> Result<EventOutcome> {
    let removed_mw = match event.kind {
        EventKind::None => 0.0,
        EventKind::TripHvdc => {
            let h = ctx
                .network
                .hvdc
                .as_ref()
                .ok_or_else(|| GridError::Event("grid has no HVDC link".into()))?;
            if ctx.hvdc.is_none() {
                return Err(GridError::Event("HVDC link already tripped".into()));
            }
            let p = h.p_inject;
            ctx.hvdc = None;
            p
        }
        EventKind::TripGenUnit(id) => {
            let unit = ctx
                .units
                .iter()
                .find(|u| u.id == id)
                .ok_or_else(|| GridError::Event(format!("unknown unit {id}")))?;
            if ctx.tripped_units.contains(&id) {
                return Err(GridError::Event(format!("unit {id} already tripped")));
            }
            let p0 = unit.p0;
            let before = ctx.reference_angle(&ctx.state);
            let mut state = Vec::with_capacity(ctx.state.len());
            let mut devices = Vec::with_capacity(ctx.devices.len());
            for (k, d) in ctx.devices.iter().enumerate() {
                if d.unit_id != id {
                    state.extend_from_slice(&ctx.state[ctx.offsets[k]..ctx.offsets[k + 1]]);
                    devices.push(d.clone());
                }
            }
            ctx.devices = devices;
            ctx.state = state;
            ctx.offsets = layout(&ctx.devices);
            if ctx.devices.is_empty() {
                return Err(GridError::Event(format!("tripping unit {id} leaves no sources")));
            }
            ctx.reference_offset += before - ctx.reference_angle(&ctx.state);
            ctx.tripped_units.push(id);
            p0
        }
    };
    ctx.solver = ctx.build_solver()?;
    Ok(EventOutcome { removed_mw })
}
