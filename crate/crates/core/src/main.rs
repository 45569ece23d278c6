use std::process::ExitCode;

use clap::Parser;

use gridform::config::{resolve, Cli, Mode, RunConfig};
use gridform::output::{recompute_metrics, write_metrics_csv, write_outputs, write_scatter_csv, METRICS_FILE, SCATTER_FILE};
use gridform::sim::EventKind;
use gridform::sweep::{run_scenario, run_sweep, ScenarioOutcome, SweepPlan};
use gridform::GridError;

const EXIT_UNSTABLE: u8 = 2;

fn simulate(cfg: &RunConfig) -> Result<Vec<ScenarioOutcome>, GridError> {
    let topo = cfg.load_topology()?;
    let settings = cfg.settings();
    match cfg.mode {
        Mode::Sweep => run_sweep(&topo, &settings, &cfg.plan()),
        _ if cfg.scenario.event == EventKind::None => {
            Ok(vec![run_scenario(&topo, &settings, cfg.scenario.eta, EventKind::None)])
        }
        // a single event run still gets its eta = 0 baseline for normalization
        _ => run_sweep(
            &topo,
            &settings,
            &SweepPlan {
                etas: vec![cfg.scenario.eta],
                events: vec![cfg.scenario.event],
                jobs: cfg.jobs,
            },
        ),
    }
}

fn run(cfg: &RunConfig) -> Result<bool, GridError> {
    if cfg.mode == Mode::Metrics {
        let reports = recompute_metrics(cfg.input_dir(), cfg)?;
        std::fs::create_dir_all(&cfg.out).map_err(|e| GridError::io(&cfg.out, e))?;
        write_metrics_csv(&cfg.out.join(METRICS_FILE), &reports)?;
        write_scatter_csv(&cfg.out.join(SCATTER_FILE), &reports)?;
        eprintln!("recomputed metrics for {} trajectories into {}", reports.len(), cfg.out.display());
        return Ok(true);
    }
    let outcomes = simulate(cfg)?;
    write_outputs(&outcomes, cfg)?;
    let t0 = cfg.scenario.event_time;
    for o in &outcomes {
        let dev = o
            .trajectory
            .as_ref()
            .and_then(|t| t.steady_state_deviation(t0))
            .map(|d| format!("{d:+.6} pu"))
            .unwrap_or_else(|| "-".into());
        match &o.status {
            gridform::sweep::RunStatus::Stable => {
                eprintln!("eta {:.2} {:<5} {:<16} stable    final deviation {dev}", o.eta, o.event.to_string(), o.pss.to_string())
            }
            gridform::sweep::RunStatus::Unstable(why) => {
                eprintln!("eta {:.2} {:<5} {:<16} UNSTABLE  {why}", o.eta, o.event.to_string(), o.pss.to_string())
            }
        }
    }
    eprintln!("outputs in {}", cfg.out.display());
    Ok(outcomes.iter().all(|o| o.is_stable()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match resolve(cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    match run(&cfg) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_UNSTABLE),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
