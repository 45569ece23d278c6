//! The topology file: network, dispatch and the shared device constants.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::converter::DroopConstants;
use crate::error::{GridError, Result};
use crate::machine::{MachineConstants, PssConfig};
use crate::network::{Bus, GeneratorSite, HvdcInjection, Line, Load, NetworkModel};
use crate::transition::GenUnit;
use crate::units::BaseSystem;

const BUNDLED: &str = include_str!("../../../data/quebec7.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Topology {
    #[serde(default)]
    pub name: String,
    pub base: BaseSystem,
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    #[serde(default)]
    pub loads: Vec<Load>,
    pub generators: Vec<GeneratorSite>,
    #[serde(default)]
    pub hvdc: Option<HvdcInjection>,
    pub machine: MachineConstants,
    pub converter: DroopConstants,
    /// Original stabilizer tuning shared by all machines.
    pub pss: PssConfig,
}

impl Topology {
    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| GridError::io(path, e))?;
        let topo = Self::from_json(&text).map_err(|e| GridError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        topo.validate()?;
        Ok(topo)
    }

    /// The seven-unit grid shipped in `data/quebec7.json`.
    pub fn bundled() -> Self {
        Self::from_json(BUNDLED).expect("bundled topology parses")
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        self.network().validate()?;
        self.machine.validate()?;
        self.converter.validate()?;
        self.pss.validate()
    }

    pub fn network(&self) -> NetworkModel {
        NetworkModel {
            buses: self.buses.clone(),
            lines: self.lines.clone(),
            loads: self.loads.clone(),
            hvdc: self.hvdc.clone(),
            generators: self.generators.clone(),
        }
    }

    /// All-machine units in generator order.
    pub fn units(&self) -> Vec<GenUnit> {
        self.generators
            .iter()
            .map(|g| GenUnit::from_site(g, self.machine, self.converter))
            .collect()
    }

    pub fn total_rating(&self) -> f64 {
        self.generators.iter().map(|g| g.s_rating).sum()
    }
}
