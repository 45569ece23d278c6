//! Run configuration: bundled defaults, an optional TOML file, then
//! command-line flags, in increasing precedence.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::{GridError, Result};
use crate::metrics::MetricOptions;
use crate::sim::EventKind;
use crate::sweep::{PssRule, RunSettings, SweepPlan};
use crate::Topology;

const BUNDLED: &str = include_str!("../../../config/default.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Run,
    Sweep,
    Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub eta: f64,
    pub event: EventKind,
    pub event_time: f64,
    pub horizon: f64,
    pub dt: f64,
    pub record_decimation: usize,
    pub pss: PssRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub etas: Vec<f64>,
    pub events: Vec<EventKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsConfig {
    pub rocof_windows: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nadir_filter_hz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topology: Option<PathBuf>,
    pub out: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    pub jobs: usize,
    pub seed: u64,
    pub scenario: ScenarioConfig,
    pub sweep: SweepConfig,
    pub metrics: MetricsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::from_table(bundled_table()).expect("bundled configuration is valid")
    }
}

fn bundled_table() -> toml::Table {
    BUNDLED.parse().expect("bundled configuration parses")
}

/// Recursively overwrites `base` with the keys of `over`.
fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

impl RunConfig {
    fn from_table(table: toml::Table) -> Result<Self> {
        let cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| GridError::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Bundled defaults overlaid with the keys present in `text`.
    pub fn from_toml(text: &str) -> Result<Self> {
        let over: toml::Table = text.parse().map_err(|e: toml::de::Error| GridError::Config(e.to_string()))?;
        let mut table = bundled_table();
        merge(&mut table, over);
        Self::from_table(table)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| GridError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| GridError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(GridError::Config(m));
        let s = &self.scenario;
        if !(0.0..=1.0).contains(&s.eta) {
            return bad(format!("scenario.eta {} outside [0, 1]", s.eta));
        }
        if !(s.dt > 0.0) {
            return bad(format!("scenario.dt must be positive, got {}", s.dt));
        }
        if !(s.horizon > s.event_time) || !(s.event_time >= 0.0) {
            return bad("need 0 <= event_time < horizon".into());
        }
        if s.record_decimation == 0 {
            return bad("scenario.record_decimation must be at least 1".into());
        }
        if self.jobs == 0 {
            return bad("jobs must be at least 1".into());
        }
        if let Some(e) = self.sweep.etas.iter().find(|e| !(0.0..=1.0).contains(*e)) {
            return bad(format!("sweep eta {e} outside [0, 1]"));
        }
        if let Some(w) = self.metrics.rocof_windows.iter().find(|w| !(**w > 0.0)) {
            return bad(format!("RoCoF window {w} must be positive"));
        }
        if let Some(p) = &self.topology {
            if !p.exists() {
                return bad(format!("topology file {} does not exist", p.display()));
            }
        }
        Ok(())
    }

    pub fn load_topology(&self) -> Result<Topology> {
        match &self.topology {
            Some(p) => Topology::load(p),
            None => Ok(Topology::bundled()),
        }
    }

    pub fn metric_options(&self) -> MetricOptions {
        MetricOptions {
            windows: self.metrics.rocof_windows.clone(),
            nadir_filter_hz: self.metrics.nadir_filter_hz,
        }
    }

    pub fn settings(&self) -> RunSettings {
        RunSettings {
            event_time: self.scenario.event_time,
            horizon: self.scenario.horizon,
            dt: self.scenario.dt,
            record_decimation: self.scenario.record_decimation,
            pss_rule: self.scenario.pss,
            metrics: self.metric_options(),
        }
    }

    pub fn plan(&self) -> SweepPlan {
        SweepPlan {
            etas: self.sweep.etas.clone(),
            events: self.sweep.events.clone(),
            jobs: self.jobs,
        }
    }

    /// Directory holding the trajectories read by the metrics mode.
    pub fn input_dir(&self) -> &Path {
        self.input.as_deref().unwrap_or(&self.out)
    }
}

#[derive(Debug, Parser)]
#[command(name = "gridform", version, about = "Frequency dynamics of a grid moving from synchronous machines to grid-forming converters")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Option<Command>,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one scenario.
    Run,
    /// Simulate every (eta, event) pair of the sweep grid.
    Sweep,
    /// Recompute metrics from trajectory files written by an earlier run.
    Metrics {
        /// Directory with traj_eta*_*.csv files (default: --out).
        #[arg(long, value_name = "DIR")]
        input: Option<PathBuf>,
    },
}

#[derive(Debug, Default, clap::Args)]
pub struct Flags {
    /// TOML file overriding the bundled defaults.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Topology JSON replacing the bundled grid.
    #[arg(long, global = true, value_name = "PATH")]
    pub topology: Option<PathBuf>,
    /// Converter share of installed rating, 0 to 1.
    #[arg(long, global = true, value_name = "F")]
    pub eta: Option<f64>,
    /// genN, hvdc or none.
    #[arg(long, global = true)]
    pub event: Option<EventKind>,
    /// Simulated time, s.
    #[arg(long, global = true, value_name = "S")]
    pub horizon: Option<f64>,
    /// Integration step, s.
    #[arg(long, global = true, value_name = "S")]
    pub dt: Option<f64>,
    /// original, high_penetration, disabled or auto.
    #[arg(long, global = true)]
    pub pss: Option<PssRule>,
    /// Same as the sweep subcommand.
    #[arg(long, global = true)]
    pub sweep: bool,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads for sweeps.
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
    /// RoCoF windows, s.
    #[arg(long, global = true, value_delimiter = ',', value_name = "T,...")]
    pub rocof_windows: Option<Vec<f64>>,
}

/// Resolves the configuration from command-line arguments (program name
/// first).
pub fn parse_config<I, T>(args: I) -> Result<RunConfig>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| GridError::Config(e.to_string()))?;
    resolve(cli)
}

pub fn resolve(cli: Cli) -> Result<RunConfig> {
    let f = cli.flags;
    let mut cfg = match &f.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let from_command = match &cli.command {
        Some(Command::Run) => Some(Mode::Run),
        Some(Command::Sweep) => Some(Mode::Sweep),
        Some(Command::Metrics { input }) => {
            if input.is_some() {
                cfg.input = input.clone();
            }
            Some(Mode::Metrics)
        }
        None => None,
    };
    if f.sweep {
        if matches!(from_command, Some(m) if m != Mode::Sweep) {
            return Err(GridError::Config("--sweep contradicts the chosen subcommand".into()));
        }
        cfg.mode = Mode::Sweep;
    } else if let Some(m) = from_command {
        cfg.mode = m;
    }
    if cfg.mode == Mode::Sweep && (f.eta.is_some() || f.event.is_some()) {
        return Err(GridError::Config("--eta and --event select a single scenario and contradict a sweep".into()));
    }
    if let Some(v) = f.topology {
        cfg.topology = Some(v);
    }
    if let Some(v) = f.eta {
        cfg.scenario.eta = v;
    }
    if let Some(v) = f.event {
        cfg.scenario.event = v;
    }
    if let Some(v) = f.horizon {
        cfg.scenario.horizon = v;
    }
    if let Some(v) = f.dt {
        cfg.scenario.dt = v;
    }
    if let Some(v) = f.pss {
        cfg.scenario.pss = v;
    }
    if let Some(v) = f.out {
        cfg.out = v;
    }
    if let Some(v) = f.jobs {
        cfg.jobs = v;
    }
    if let Some(v) = f.rocof_windows {
        cfg.metrics.rocof_windows = v;
    }
    cfg.validate()?;
    Ok(cfg)
}
