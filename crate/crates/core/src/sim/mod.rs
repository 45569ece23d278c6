//! Fixed-step time-domain simulation of the machine/converter/network system.

mod context;
mod integrate;
mod trajectory;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use context::{assemble_system, apply_event, Device, DeviceModel, EventOutcome, SimContext};
pub use integrate::integrate;
pub use trajectory::{DeviceKind, DeviceTrace, Trajectory};

use crate::error::{GridError, Result};
use crate::machine::PssConfig;

/// Contingency kinds. Serialized as `genN`, `hvdc` or `none`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum EventKind {
    None,
    /// Simultaneous loss of the machine and converter of one unit.
    TripGenUnit(usize),
    TripHvdc,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EventKind::None => f.write_str("none"),
            EventKind::TripGenUnit(u) => write!(f, "gen{u}"),
            EventKind::TripHvdc => f.write_str("hvdc"),
        }
    }
}

impl FromStr for EventKind {
    type Err = GridError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(EventKind::None),
            "hvdc" => Ok(EventKind::TripHvdc),
            _ => s
                .strip_prefix("gen")
                .and_then(|n| n.parse().ok())
                .map(EventKind::TripGenUnit)
                .ok_or_else(|| GridError::Config(format!("unknown event `{s}` (expected genN, hvdc or none)"))),
        }
    }
}

impl TryFrom<String> for EventKind {
    type Error = GridError;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<EventKind> for String {
    fn from(e: EventKind) -> Self {
        e.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub kind: EventKind,
    /// Event time, s.
    pub t0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub eta: f64,
    pub event: Option<Event>,
    /// Stabilizer settings applied to every machine.
    pub pss: PssConfig,
    pub horizon: f64,
    pub dt: f64,
    pub record_decimation: usize,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(GridError::InvalidParameter(format!("eta {} outside [0, 1]", self.eta)));
        }
        if !(self.dt > 0.0) || !(self.horizon > 0.0) {
            return Err(GridError::InvalidParameter("dt and horizon must be positive".into()));
        }
        if self.record_decimation == 0 {
            return Err(GridError::InvalidParameter("record decimation must be at least 1".into()));
        }
        if let Some(ev) = &self.event {
            if !(ev.t0 >= 0.0) || !(self.horizon > ev.t0) {
                return Err(GridError::InvalidParameter(format!(
                    "event time {} must lie in [0, horizon)",
                    ev.t0
                )));
            }
        }
        self.pss.validate()
    }

    /// Index of the first step boundary at or after the event time.
    pub fn event_step(&self) -> Option<usize> {
        self.event
            .filter(|e| e.kind != EventKind::None)
            .map(|e| (e.t0 / self.dt - 1e-9).ceil().max(0.0) as usize)
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }
}
