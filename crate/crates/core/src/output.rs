//! CSV and summary files. Floats are written in shortest round-trip form so
//! re-reading a trajectory reproduces it exactly.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{GridError, Result};
use crate::metrics::{compute_metrics, normalize_metrics, MetricsReport};
use crate::sim::{DeviceKind, DeviceTrace, EventKind, Trajectory};
use crate::sweep::{RunStatus, ScenarioOutcome};

pub const TRAJECTORY_HEADER: [&str; 6] = ["t", "unit_id", "kind", "freq_pu", "p_pu", "vmag_pu"];
pub const METRICS_HEADER: [&str; 7] = ["eta", "event", "unit_id", "metric", "window_s", "value", "normalized"];
pub const SCATTER_HEADER: [&str; 7] = [
    "eta",
    "event",
    "unit_id",
    "source",
    "window_s",
    "normalized_rocof",
    "normalized_nadir",
];

pub const METRICS_FILE: &str = "metrics.csv";
pub const SCATTER_FILE: &str = "scatter.csv";
pub const SUMMARY_FILE: &str = "run_summary.toml";

pub fn trajectory_file_name(eta: f64, event: EventKind) -> String {
    format!("traj_eta{eta:.2}_{event}.csv")
}

/// Inverse of [`trajectory_file_name`].
pub fn parse_trajectory_file_name(name: &str) -> Option<(f64, EventKind)> {
    let rest = name.strip_prefix("traj_eta")?.strip_suffix(".csv")?;
    let (eta, event) = rest.split_once('_')?;
    Some((eta.parse().ok()?, event.parse().ok()?))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let f = File::create(path).map_err(|e| GridError::io(path, e))?;
    Ok(csv::Writer::from_writer(BufWriter::new(f)))
}

fn csv_err(path: &Path, e: csv::Error) -> GridError {
    GridError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per device per sample, ordered by sample then device.
pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = |e| csv_err(path, e);
    w.write_record(TRAJECTORY_HEADER).map_err(err)?;
    for (k, t) in traj.times.iter().enumerate() {
        for d in traj.devices.iter().filter(|d| k < d.len()) {
            w.write_record([
                t.to_string(),
                d.unit_id.to_string(),
                d.kind.as_str().to_string(),
                d.freq[k].to_string(),
                d.p[k].to_string(),
                d.vmag[k].to_string(),
            ])
            .map_err(err)?;
        }
    }
    w.flush().map_err(|e| GridError::io(path, e))
}

/// Reads a trajectory file back. Bus voltages are not part of the file and
/// come back empty.
pub fn read_trajectory_csv(path: &Path) -> Result<Trajectory> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.iter().ne(TRAJECTORY_HEADER) {
        return Err(GridError::Parse {
            path: path.to_path_buf(),
            message: format!("unexpected header `{}`", header.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let bad = |line: u64, what: &str| GridError::Parse {
        path: path.to_path_buf(),
        message: format!("line {line}: bad {what}"),
    };
    let mut times: Vec<f64> = Vec::new();
    let mut devices: Vec<DeviceTrace> = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let num = |i: usize, what: &str| rec[i].parse::<f64>().map_err(|_| bad(line, what));
        let t = num(0, "time")?;
        let unit_id: usize = rec[1].parse().map_err(|_| bad(line, "unit id"))?;
        let kind: DeviceKind = rec[2].parse().map_err(|_| bad(line, "device kind"))?;
        if times.last() != Some(&t) {
            times.push(t);
        }
        let k = times.len() - 1;
        let pos = match devices.iter().position(|d| d.unit_id == unit_id && d.kind == kind) {
            Some(p) => p,
            None => {
                devices.push(DeviceTrace {
                    unit_id,
                    kind,
                    freq: Vec::new(),
                    p: Vec::new(),
                    vmag: Vec::new(),
                });
                devices.len() - 1
            }
        };
        let d = &mut devices[pos];
        if d.len() != k {
            return Err(bad(line, "sample order"));
        }
        d.freq.push(num(3, "frequency")?);
        d.p.push(num(4, "power")?);
        d.vmag.push(num(5, "voltage")?);
    }
    Ok(Trajectory {
        times,
        bus_ids: Vec::new(),
        bus_vmag: Vec::new(),
        devices,
        t_event: None,
        max_balance_residual: 0.0,
    })
}

/// Long format: one nadir row and one row per RoCoF window for each unit.
pub fn write_metrics_csv(path: &Path, reports: &[MetricsReport]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = |e| csv_err(path, e);
    w.write_record(METRICS_HEADER).map_err(err)?;
    for r in reports {
        for u in &r.units {
            let head = [r.eta.to_string(), r.event.to_string(), u.unit_id.to_string()];
            w.write_record(head.iter().cloned().chain([
                "nadir".into(),
                String::new(),
                u.nadir.to_string(),
                opt(u.normalized_nadir),
            ]))
            .map_err(err)?;
            for (i, win) in r.windows.iter().enumerate() {
                w.write_record(head.iter().cloned().chain([
                    "rocof".into(),
                    win.to_string(),
                    u.rocof[i].to_string(),
                    opt(u.normalized_rocof[i]),
                ]))
                .map_err(err)?;
            }
        }
    }
    w.flush().map_err(|e| GridError::io(path, e))
}

/// Normalized nadir against normalized RoCoF, one row per unit and window.
pub fn write_scatter_csv(path: &Path, reports: &[MetricsReport]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = |e| csv_err(path, e);
    w.write_record(SCATTER_HEADER).map_err(err)?;
    for r in reports {
        for u in &r.units {
            for (i, win) in r.windows.iter().enumerate() {
                w.write_record([
                    r.eta.to_string(),
                    r.event.to_string(),
                    u.unit_id.to_string(),
                    u.source.as_str().to_string(),
                    win.to_string(),
                    opt(u.normalized_rocof[i]),
                    opt(u.normalized_nadir),
                ])
                .map_err(err)?;
            }
        }
    }
    w.flush().map_err(|e| GridError::io(path, e))
}

#[derive(Serialize)]
struct ScenarioSummary {
    eta: f64,
    event: EventKind,
    pss: String,
    #[serde(flatten)]
    status: RunStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    trajectory: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    steady_state_deviation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    final_spread: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_balance_residual: Option<f64>,
}

#[derive(Serialize)]
struct Summary<'a> {
    config: &'a RunConfig,
    scenario: Vec<ScenarioSummary>,
}

fn summarize(o: &ScenarioOutcome, t0: f64) -> ScenarioSummary {
    let traj = o.trajectory.as_ref();
    ScenarioSummary {
        eta: o.eta,
        event: o.event,
        pss: o.pss.to_string(),
        status: o.status.clone(),
        trajectory: traj.map(|_| trajectory_file_name(o.eta, o.event)),
        steady_state_deviation: traj.and_then(|t| t.steady_state_deviation(t0)),
        final_spread: traj.map(|t| t.final_spread()),
        max_balance_residual: traj.map(|t| t.max_balance_residual),
    }
}

/// Summary file: the resolved configuration under `[config]` and one
/// `[[scenario]]` table per outcome.
pub fn write_summary(path: &Path, config: &RunConfig, outcomes: &[ScenarioOutcome]) -> Result<()> {
    let summary = Summary {
        config,
        scenario: outcomes
            .iter()
            .map(|o| summarize(o, config.scenario.event_time))
            .collect(),
    };
    let text = toml::to_string(&summary).map_err(|e| GridError::Config(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| GridError::io(path, e))
}

/// Reads back the `[config]` table of a summary file.
pub fn read_summary_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| GridError::io(path, e))?;
    let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| GridError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let cfg = table.remove("config").ok_or_else(|| GridError::Parse {
        path: path.to_path_buf(),
        message: "no [config] table".into(),
    })?;
    RunConfig::from_toml(&toml::to_string(&cfg).expect("table serializes"))
}

/// Writes one trajectory file per finished scenario, the metrics and scatter
/// tables, and the summary. Returns the paths written.
pub fn write_outputs(outcomes: &[ScenarioOutcome], config: &RunConfig) -> Result<Vec<PathBuf>> {
    let dir = &config.out;
    std::fs::create_dir_all(dir).map_err(|e| GridError::io(dir, e))?;
    let mut written = Vec::new();
    for o in outcomes {
        if let Some(traj) = &o.trajectory {
            let p = dir.join(trajectory_file_name(o.eta, o.event));
            write_trajectory_csv(&p, traj)?;
            written.push(p);
        }
    }
    let reports: Vec<MetricsReport> = outcomes.iter().filter_map(|o| o.metrics.clone()).collect();
    for (name, f) in [
        (METRICS_FILE, write_metrics_csv as fn(&Path, &[MetricsReport]) -> Result<()>),
        (SCATTER_FILE, write_scatter_csv),
    ] {
        let p = dir.join(name);
        f(&p, &reports)?;
        written.push(p);
    }
    let p = dir.join(SUMMARY_FILE);
    write_summary(&p, config, outcomes)?;
    written.push(p);
    Ok(written)
}

/// Metrics recomputed from the trajectory files in `dir`, normalized
/// against the eta = 0 file of the same event when one is present. Reports
/// are ordered by event then eta.
pub fn recompute_metrics(dir: &Path, config: &RunConfig) -> Result<Vec<MetricsReport>> {
    let entries = std::fs::read_dir(dir).map_err(|e| GridError::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| GridError::io(dir, e))?;
        let name = entry.file_name();
        if let Some((eta, event)) = name.to_str().and_then(parse_trajectory_file_name) {
            if event != EventKind::None {
                files.push((event, eta, entry.path()));
            }
        }
    }
    files.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let opts = config.metric_options();
    let t0 = config.scenario.event_time;
    let mut raw = Vec::with_capacity(files.len());
    for (event, eta, path) in &files {
        let traj = read_trajectory_csv(path)?;
        raw.push(compute_metrics(&traj, *eta, *event, t0, &opts).map_err(|e| GridError::Parse {
            path: path.clone(),
            message: e.to_string(),
        })?);
    }
    let mut out = Vec::with_capacity(raw.len());
    for r in &raw {
        let base = raw.iter().find(|b| b.event == r.event && b.eta == 0.0);
        out.push(match base {
            Some(b) => normalize_metrics(r, b)?,
            None => r.clone(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::UnitMetrics;

    fn sample_traj() -> Trajectory {
        let trace = |unit_id, kind, n: usize| DeviceTrace {
            unit_id,
            kind,
            freq: (0..n).map(|k| 1.0 - 1e-3 * k as f64 / 3.0).collect(),
            p: vec![0.8; n],
            vmag: vec![1.0123456789; n],
        };
        Trajectory {
            times: vec![0.0, 0.01, 0.02],
            bus_ids: vec![1],
            bus_vmag: vec![vec![1.0]; 3],
            devices: vec![trace(1, DeviceKind::Sm, 3), trace(1, DeviceKind::Gfc, 3), trace(2, DeviceKind::Sm, 1)],
            t_event: Some(0.01),
            max_balance_residual: 0.0,
        }
    }

    #[test]
    fn file_names_round_trip() {
        assert_eq!(trajectory_file_name(0.3, EventKind::TripHvdc), "traj_eta0.30_hvdc.csv");
        assert_eq!(trajectory_file_name(1.0, EventKind::TripGenUnit(1)), "traj_eta1.00_gen1.csv");
        assert_eq!(
            parse_trajectory_file_name("traj_eta0.70_gen1.csv"),
            Some((0.7, EventKind::TripGenUnit(1)))
        );
        assert_eq!(parse_trajectory_file_name("metrics.csv"), None);
    }

    #[test]
    fn trajectory_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        let tr = sample_traj();
        write_trajectory_csv(&p, &tr).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("t,unit_id,kind,freq_pu,p_pu,vmag_pu\n"));
        // tripped device contributes one row only
        assert_eq!(text.lines().count(), 1 + 3 * 2 + 1);
        let back = read_trajectory_csv(&p).unwrap();
        assert_eq!(back.times, tr.times);
        assert_eq!(back.devices, tr.devices);
    }

    #[test]
    fn wrong_header_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        std::fs::write(&p, "time,unit,kind,f,p,v\n").unwrap();
        assert!(read_trajectory_csv(&p).is_err());
    }

    #[test]
    fn empty_metrics_file_has_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join(METRICS_FILE);
        write_metrics_csv(&p, &[]).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "eta,event,unit_id,metric,window_s,value,normalized\n");
    }

    #[test]
    fn metrics_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join(METRICS_FILE);
        let r = MetricsReport {
            eta: 0.3,
            event: EventKind::TripHvdc,
            windows: vec![0.1, 0.5],
            units: vec![UnitMetrics {
                unit_id: 5,
                source: DeviceKind::Sm,
                nadir: 0.004,
                rocof: vec![0.02, 0.008],
                normalized_nadir: Some(0.5),
                normalized_rocof: vec![Some(1.5), None],
            }],
        };
        write_metrics_csv(&p, &[r]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1], "0.3,hvdc,5,nadir,,0.004,0.5");
        assert_eq!(lines[2], "0.3,hvdc,5,rocof,0.1,0.02,1.5");
        assert_eq!(lines[3], "0.3,hvdc,5,rocof,0.5,0.008,");
    }
}
