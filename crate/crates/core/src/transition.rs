//! Replacement of synchronous machines by collocated grid-forming
//! converters as a function of the converter share `eta`.

use serde::{Deserialize, Serialize};

use crate::converter::DroopConstants;
use crate::error::{GridError, Result};
use crate::machine::MachineConstants;
use crate::network::GeneratorSite;

/// A generation site holding a synchronous machine and a converter side by
/// side. Ratings in MVA, dispatch in MW.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenUnit {
    pub id: usize,
    pub bus: usize,
    pub s_sm0: f64,
    pub s_sm: f64,
    pub s_gfc: f64,
    pub p0: f64,
    pub v_set: f64,
    pub slack: bool,
    pub machine: MachineConstants,
    pub converter: DroopConstants,
}

impl GenUnit {
    /// All-machine unit as found in the original grid.
    pub fn from_site(site: &GeneratorSite, machine: MachineConstants, converter: DroopConstants) -> Self {
        Self {
            id: site.id,
            bus: site.bus,
            s_sm0: site.s_rating,
            s_sm: site.s_rating,
            s_gfc: 0.0,
            p0: site.p_dispatch,
            v_set: site.v_set,
            slack: site.slack,
            machine,
            converter,
        }
    }

    pub fn total_rating(&self) -> f64 {
        self.s_sm + self.s_gfc
    }

    /// Dispatch carried by the machine, MW.
    pub fn p_sm(&self) -> f64 {
        self.p0 * self.s_sm / self.s_sm0
    }

    /// Dispatch carried by the converter, MW.
    pub fn p_gfc(&self) -> f64 {
        self.p0 * self.s_gfc / self.s_sm0
    }
}

/// Converter share of the total installed rating.
pub fn compute_eta(units: &[GenUnit]) -> Result<f64> {
    let gfc: f64 = units.iter().map(|u| u.s_gfc).sum();
    let total: f64 = units.iter().map(|u| u.s_gfc + u.s_sm).sum();
    if units.is_empty() || !(total > 0.0) {
        return Err(GridError::InvalidParameter("total generation rating is zero".into()));
    }
    Ok(gfc / total)
}

/// Splits every original machine rating into a converter part `eta S0`
/// and a machine part `(1 - eta) S0`. Inertia and turbine constants are
/// rating independent and carried over unchanged.
pub fn apply_transition(units0: &[GenUnit], eta: f64) -> Result<Vec<GenUnit>> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(GridError::InvalidParameter(format!("eta must lie in [0, 1], got {eta}")));
    }
    Ok(units0
        .iter()
        .map(|u| {
            let s_gfc = eta * u.s_sm0;
            GenUnit {
                s_gfc,
                s_sm: u.s_sm0 - s_gfc,
                ..u.clone()
            }
        })
        .collect())
}

/// Post-contingency frequency deviation predicted by aggregating the droop
/// of every surviving unit: `-R dP / sum(S)`, pu. Load voltage sensitivity
/// and losses are ignored.
pub fn steady_state_deviation_oracle(delta_p_mw: f64, surviving: &[GenUnit]) -> Result<f64> {
    if surviving.is_empty() {
        return Err(GridError::InvalidParameter("no surviving units".into()));
    }
    let mut droops = surviving.iter().flat_map(|u| {
        let sm = (u.s_sm > 0.0).then_some(u.machine.governor.r);
        let gfc = (u.s_gfc > 0.0).then_some(u.converter.m_p);
        sm.into_iter().chain(gfc)
    });
    let r = droops
        .next()
        .ok_or_else(|| GridError::InvalidParameter("surviving units have no rating".into()))?;
    if droops.any(|x| (x - r).abs() > 1e-12) {
        return Err(GridError::InvalidParameter("droop is not uniform across units".into()));
    }
    let total: f64 = surviving.iter().map(GenUnit::total_rating).sum();
    Ok(-r * delta_p_mw / total)
}
