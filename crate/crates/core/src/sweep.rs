//! Penetration sweeps: one simulation per (eta, event), run in parallel,
//! with metrics normalized against the all-machine grid.

use serde::{Deserialize, Serialize};

use crate::error::{GridError, Result};
use crate::machine::{make_pss_profile, PssProfile};
use crate::metrics::{compute_metrics, normalize_metrics, MetricOptions, MetricsReport};
use crate::sim::{assemble_system, integrate, Event, EventKind, Scenario, Trajectory};
use crate::transition::apply_transition;
use crate::Topology;

/// Final frequency spread above which a run counts as unstable, pu.
pub const UNSTABLE_SPREAD: f64 = 1e-2;

/// Stabilizer profile per eta: original up to 0.7, retuned for 0.8 and 0.9,
/// none once every machine is gone.
pub fn default_pss_profile(eta: f64) -> PssProfile {
    if eta >= 1.0 {
        PssProfile::Disabled
    } else if eta > 0.75 {
        PssProfile::HighPenetration
    } else {
        PssProfile::Original
    }
}

/// `auto` applies [`default_pss_profile`]; a profile name fixes it for
/// every eta.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum PssRule {
    Auto,
    Fixed(PssProfile),
}

impl PssRule {
    pub fn profile(&self, eta: f64) -> PssProfile {
        match self {
            PssRule::Auto => default_pss_profile(eta),
            PssRule::Fixed(p) => *p,
        }
    }
}

impl std::str::FromStr for PssRule {
    type Err = GridError;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            Ok(PssRule::Auto)
        } else {
            s.parse().map(PssRule::Fixed)
        }
    }
}

impl TryFrom<String> for PssRule {
    type Error = GridError;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<PssRule> for String {
    fn from(r: PssRule) -> Self {
        r.to_string()
    }
}

impl std::fmt::Display for PssRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PssRule::Auto => f.write_str("auto"),
            PssRule::Fixed(p) => p.fmt(f),
        }
    }
}

/// Time settings shared by every run of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub event_time: f64,
    pub horizon: f64,
    pub dt: f64,
    pub record_decimation: usize,
    pub pss_rule: PssRule,
    pub metrics: MetricOptions,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            event_time: 1.0,
            horizon: 60.0,
            dt: 0.001,
            record_decimation: 10,
            pss_rule: PssRule::Auto,
            metrics: MetricOptions::default(),
        }
    }
}

impl RunSettings {
    pub fn scenario(&self, topo: &Topology, eta: f64, event: EventKind) -> Scenario {
        Scenario {
            eta,
            event: (event != EventKind::None).then_some(Event {
                kind: event,
                t0: self.event_time,
            }),
            pss: make_pss_profile(self.pss_rule.profile(eta), &topo.pss),
            horizon: self.horizon,
            dt: self.dt,
            record_decimation: self.record_decimation,
        }
    }
}

/// Builds the units for `eta`, initializes at the power-flow equilibrium and
/// integrates one scenario.
pub fn simulate(topo: &Topology, scenario: &Scenario) -> Result<Trajectory> {
    let units = apply_transition(&topo.units(), scenario.eta)?;
    let mut ctx = assemble_system(&topo.network(), &topo.base, &units, scenario)?;
    integrate(&mut ctx, scenario)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason", rename_all = "snake_case")]
pub enum RunStatus {
    Stable,
    Unstable(String),
}

impl RunStatus {
    pub fn is_stable(&self) -> bool {
        matches!(self, RunStatus::Stable)
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub eta: f64,
    pub event: EventKind,
    pub pss: PssProfile,
    pub status: RunStatus,
    /// Present whenever integration finished, even if classified unstable.
    pub trajectory: Option<Trajectory>,
    /// Raw metrics with normalized fields filled when a baseline exists.
    pub metrics: Option<MetricsReport>,
}

impl ScenarioOutcome {
    pub fn is_stable(&self) -> bool {
        self.status.is_stable()
    }
}

fn classify(traj: &Trajectory) -> RunStatus {
    let spread = traj.final_spread();
    if spread > UNSTABLE_SPREAD {
        RunStatus::Unstable(format!("final frequency spread {spread:.3e} pu"))
    } else {
        RunStatus::Stable
    }
}

/// Runs one scenario and computes its raw metrics. Failures are recorded in
/// the outcome rather than returned.
pub fn run_scenario(topo: &Topology, settings: &RunSettings, eta: f64, event: EventKind) -> ScenarioOutcome {
    let scenario = settings.scenario(topo, eta, event);
    let pss = settings.pss_rule.profile(eta);
    let (status, trajectory) = match simulate(topo, &scenario) {
        Ok(traj) => (classify(&traj), Some(traj)),
        Err(e) => (RunStatus::Unstable(e.to_string()), None),
    };
    let metrics = match (&trajectory, event) {
        (Some(traj), EventKind::TripGenUnit(_) | EventKind::TripHvdc) => {
            compute_metrics(traj, eta, event, settings.event_time, &settings.metrics).ok()
        }
        _ => None,
    };
    ScenarioOutcome {
        eta,
        event,
        pss,
        status,
        trajectory,
        metrics,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    pub etas: Vec<f64>,
    pub events: Vec<EventKind>,
    pub jobs: usize,
}

impl Default for SweepPlan {
    fn default() -> Self {
        Self {
            etas: (0..=10).map(|k| k as f64 / 10.0).collect(),
            events: vec![EventKind::TripGenUnit(1), EventKind::TripHvdc],
            jobs: 1,
        }
    }
}

/// Runs every (eta, event) pair. The eta = 0 run of each event is done first
/// and used to normalize the others; it is always simulated, and reported
/// only when 0 is among `etas`. Outcomes are ordered by event then eta,
/// independent of completion order.
pub fn run_sweep(topo: &Topology, settings: &RunSettings, plan: &SweepPlan) -> Result<Vec<ScenarioOutcome>> {
    use rayon::prelude::*;

    if let Some(eta) = plan.etas.iter().find(|e| !(0.0..=1.0).contains(*e)) {
        return Err(GridError::InvalidParameter(format!("eta {eta} outside [0, 1]")));
    }
    if plan.jobs == 0 {
        return Err(GridError::InvalidParameter("jobs must be at least 1".into()));
    }
    let mut etas = plan.etas.clone();
    etas.sort_by(f64::total_cmp);
    etas.dedup();
    let mut events = plan.events.clone();
    events.sort();
    events.dedup();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.jobs)
        .build()
        .map_err(|e| GridError::Config(format!("thread pool: {e}")))?;

    pool.install(|| {
        let baselines: Vec<ScenarioOutcome> = events
            .par_iter()
            .map(|&ev| run_scenario(topo, settings, 0.0, ev))
            .collect();
        let rest: Vec<(EventKind, f64)> = events
            .iter()
            .flat_map(|&ev| etas.iter().filter(|&&e| e != 0.0).map(move |&e| (ev, e)))
            .collect();
        let others: Vec<ScenarioOutcome> = rest
            .par_iter()
            .map(|&(ev, eta)| run_scenario(topo, settings, eta, ev))
            .collect();

        let mut out = Vec::with_capacity(baselines.len() + others.len());
        let mut others = others.into_iter().peekable();
        for base in baselines {
            let ev = base.event;
            let mut group = Vec::new();
            if etas.first() == Some(&0.0) {
                group.push(base.clone());
            }
            while let Some(o) = others.next_if(|o| o.event == ev) {
                group.push(o);
            }
            if let Some(b) = &base.metrics {
                for o in &mut group {
                    if let Some(m) = &o.metrics {
                        o.metrics = normalize_metrics(m, b).ok().or_else(|| Some(m.clone()));
                    }
                }
            }
            out.extend(group);
        }
        Ok(out)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_rule_follows_penetration() {
        assert_eq!(default_pss_profile(0.0), PssProfile::Original);
        assert_eq!(default_pss_profile(0.7), PssProfile::Original);
        assert_eq!(default_pss_profile(0.8), PssProfile::HighPenetration);
        assert_eq!(default_pss_profile(0.9), PssProfile::HighPenetration);
        assert_eq!(default_pss_profile(1.0), PssProfile::Disabled);
    }

    #[test]
    fn rule_names_round_trip() {
        for r in [
            PssRule::Auto,
            PssRule::Fixed(PssProfile::Original),
            PssRule::Fixed(PssProfile::HighPenetration),
            PssRule::Fixed(PssProfile::Disabled),
        ] {
            assert_eq!(r.to_string().parse::<PssRule>().unwrap(), r);
        }
    }

    #[test]
    fn default_plan_has_22_scenarios() {
        let p = SweepPlan::default();
        assert_eq!(p.etas.len() * p.events.len(), 22);
    }
}
