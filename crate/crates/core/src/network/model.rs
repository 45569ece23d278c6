use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{GridError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    North,
    Northwest,
    South,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bus {
    pub id: usize,
    #[serde(default)]
    pub name: String,
    pub region: Region,
    /// Nominal line-to-line voltage, kV.
    pub v_nom: f64,
}

/// One circuit of a pi-modelled transmission line. Parallel circuits are
/// listed as separate entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Line {
    pub from_bus: usize,
    pub to_bus: usize,
    /// km
    pub length: f64,
    /// ohm/km
    pub r_per_km: f64,
    /// ohm/km
    pub x_per_km: f64,
    /// S/km, total line charging
    pub b_per_km: f64,
}

/// Constant-impedance load, specified by its consumption at nominal voltage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Load {
    pub bus: usize,
    /// MW
    pub p_nom: f64,
    /// MVAr
    pub q_nom: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HvdcInjection {
    pub bus: usize,
    /// MW delivered into the AC grid.
    pub p_inject: f64,
    #[serde(default = "yes")]
    pub active: bool,
}

fn yes() -> bool {
    true
}

/// Where a generation unit connects and how it is dispatched before any
/// transition to converters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSite {
    pub id: usize,
    pub bus: usize,
    /// Original synchronous machine rating, MVA.
    pub s_rating: f64,
    /// Active power dispatch, MW.
    pub p_dispatch: f64,
    /// Terminal voltage setpoint, pu.
    pub v_set: f64,
    #[serde(default)]
    pub slack: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkModel {
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    #[serde(default)]
    pub loads: Vec<Load>,
    #[serde(default)]
    pub hvdc: Option<HvdcInjection>,
    pub generators: Vec<GeneratorSite>,
}

impl NetworkModel {
    /// Bus id to matrix index, in the order buses are listed.
    pub fn bus_index(&self) -> BTreeMap<usize, usize> {
        self.buses
            .iter()
            .enumerate()
            .map(|(k, b)| (b.id, k))
            .collect()
    }

    pub fn index_of(&self, bus: usize) -> Result<usize> {
        self.buses
            .iter()
            .position(|b| b.id == bus)
            .ok_or_else(|| GridError::InvalidTopology(format!("unknown bus {bus}")))
    }

    pub fn generator(&self, id: usize) -> Option<&GeneratorSite> {
        self.generators.iter().find(|g| g.id == id)
    }

    pub fn validate(&self) -> Result<()> {
        if self.buses.is_empty() {
            return Err(GridError::InvalidTopology("no buses".into()));
        }
        let mut ids = BTreeSet::new();
        for b in &self.buses {
            if !ids.insert(b.id) {
                return Err(GridError::InvalidTopology(format!("duplicate bus id {}", b.id)));
            }
            if !(b.v_nom > 0.0) {
                return Err(GridError::InvalidTopology(format!(
                    "bus {} has non-positive v_nom",
                    b.id
                )));
            }
        }
        let known = |bus: usize, what: &str| {
            if ids.contains(&bus) {
                Ok(())
            } else {
                Err(GridError::InvalidTopology(format!("{what} references unknown bus {bus}")))
            }
        };
        for (k, l) in self.lines.iter().enumerate() {
            known(l.from_bus, "line")?;
            known(l.to_bus, "line")?;
            if l.from_bus == l.to_bus {
                return Err(GridError::InvalidTopology(format!("line {k} is a self-loop")));
            }
            if !(l.length > 0.0) {
                return Err(GridError::InvalidTopology(format!("line {k} has non-positive length")));
            }
            if !(l.x_per_km > 0.0) {
                return Err(GridError::InvalidTopology(format!(
                    "line {k} ({}-{}) has zero or negative series reactance",
                    l.from_bus, l.to_bus
                )));
            }
            if l.r_per_km < 0.0 || l.b_per_km < 0.0 {
                return Err(GridError::InvalidTopology(format!("line {k} has negative r or b")));
            }
        }
        for l in &self.loads {
            known(l.bus, "load")?;
            if l.p_nom < 0.0 {
                return Err(GridError::InvalidTopology(format!("load at bus {} has p_nom < 0", l.bus)));
            }
        }
        if let Some(h) = &self.hvdc {
            known(h.bus, "hvdc")?;
            if h.p_inject < 0.0 {
                return Err(GridError::InvalidTopology("hvdc p_inject < 0".into()));
            }
        }
        let mut gen_ids = BTreeSet::new();
        let mut gen_buses = BTreeSet::new();
        for g in &self.generators {
            known(g.bus, "generator")?;
            if !gen_ids.insert(g.id) {
                return Err(GridError::InvalidTopology(format!("duplicate generator id {}", g.id)));
            }
            if !gen_buses.insert(g.bus) {
                return Err(GridError::InvalidTopology(format!(
                    "more than one generator at bus {}",
                    g.bus
                )));
            }
            if !(g.s_rating > 0.0) || !(g.v_set > 0.0) {
                return Err(GridError::InvalidTopology(format!(
                    "generator {} needs positive rating and voltage setpoint",
                    g.id
                )));
            }
        }
        if self.generators.iter().filter(|g| g.slack).count() != 1 {
            return Err(GridError::InvalidTopology(
                "exactly one generator must be marked as slack".into(),
            ));
        }
        self.check_connected()
    }

    fn check_connected(&self) -> Result<()> {
        let index = self.bus_index();
        let n = self.buses.len();
        let mut adj = vec![Vec::new(); n];
        for l in &self.lines {
            let (a, b) = (index[&l.from_bus], index[&l.to_bus]);
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(k) = queue.pop_front() {
            for &j in &adj[k] {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        match seen.iter().position(|s| !s) {
            Some(k) => Err(GridError::Disconnected(self.buses[k].id)),
            None => Ok(()),
        }
    }
}
