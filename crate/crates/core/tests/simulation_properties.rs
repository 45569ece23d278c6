use gridform::config::RunConfig;
use gridform::machine::{init_sm_equilibrium, sm_derivatives, PssConfig, SmInputs, SmParams};
use gridform::output::{read_summary_config, write_summary};
use gridform::sim::{DeviceKind, EventKind, Trajectory};
use gridform::sweep::{simulate, PssRule, RunSettings};
use gridform::units::{BaseSystem, OperatingPoint, Phasor};
use gridform::Topology;
use proptest::prelude::*;

fn run(eta: f64, event: EventKind, horizon: f64) -> Trajectory {
    let topo = Topology::bundled();
    let settings = RunSettings {
        horizon,
        ..RunSettings::default()
    };
    simulate(&topo, &settings.scenario(&topo, eta, event)).unwrap()
}

fn max_drift(traj: &Trajectory, upto: usize) -> f64 {
    let mut drift: f64 = 0.0;
    for d in &traj.devices {
        for sig in [&d.freq, &d.p, &d.vmag] {
            drift = sig[..upto.min(sig.len())].iter().fold(drift, |m, v| m.max((v - sig[0]).abs()));
        }
    }
    drift
}

fn event() -> impl Strategy<Value = EventKind> {
    prop_oneof![Just(EventKind::TripHvdc), Just(EventKind::TripGenUnit(1)), Just(EventKind::TripGenUnit(5))]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn equilibrium_persists_without_event(eta in 0.0f64..=1.0) {
        let traj = run(eta, EventKind::None, 3.0);
        prop_assert!(max_drift(&traj, usize::MAX) < 1e-6);
    }

    #[test]
    fn identical_runs_are_identical(eta in 0.0f64..=1.0, ev in event()) {
        let a = run(eta, ev, 3.0);
        let b = run(eta, ev, 3.0);
        prop_assert_eq!(a, b);
    }
}

proptest! {
    #[test]
    fn damping_never_adds_kinetic_energy(
        p in 0.0f64..0.9,
        q in -0.3f64..0.3,
        d_omega in -0.05f64..0.05,
        gate_shift in -0.2f64..0.2,
    ) {
        let params = SmParams {
            s_rating: 1000.0,
            machine: Default::default(),
            pss: PssConfig::default(),
        };
        let op = OperatingPoint { v: Phasor::new(1.0, 0.0), p, q };
        let (mut s, sp) = init_sm_equilibrium(&op, &params).unwrap();
        s.d_omega = d_omega;
        s.q_t += gate_shift;
        let inputs = SmInputs {
            p_e: s.mechanical_power(),
            v_t: 1.0,
            i_d: 0.0,
            bus_d_omega: 0.0,
        };
        let ds = sm_derivatives(&s, &inputs, &params, &sp, &BaseSystem::default()).unwrap();
        let energy_rate = 2.0 * params.machine.h * s.d_omega * ds.d_omega;
        prop_assert!(energy_rate <= 0.0);
    }

    #[test]
    fn summary_preserves_configuration(
        horizon in 5.0f64..120.0,
        eta in 0.0f64..=1.0,
        jobs in 1usize..16,
        window in 1usize..10,
        pss in prop_oneof![Just("auto"), Just("original"), Just("high_penetration"), Just("disabled")],
    ) {
        let mut config = RunConfig::default();
        config.scenario.horizon = horizon;
        config.scenario.eta = eta;
        config.scenario.pss = pss.parse::<PssRule>().unwrap();
        config.jobs = jobs;
        config.metrics.rocof_windows = vec![window as f64 / 10.0];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("summary.toml");
        write_summary(&path, &config, &[]).unwrap();
        prop_assert_eq!(read_summary_config(&path).unwrap(), config);
    }
}

#[test]
fn mixed_fleet_after_hvdc_trip() {
    let t0 = RunSettings::default().event_time;
    let traj = run(0.5, EventKind::TripHvdc, 60.0);
    let k0 = traj.index_of(t0).unwrap();

    assert!(max_drift(&traj, k0) < 1e-6, "signals move before the event");
    assert!(traj.max_balance_residual < 1e-6);
    assert!(traj.final_spread() < 1e-4);

    // every survivor picks up the same share of its rating, and machines sit
    // on their droop line
    let r = Topology::bundled().machine.governor.r;
    let pickup: Vec<f64> = traj.survivors().map(|d| d.p[d.len() - 1] - d.p[k0 - 1]).collect();
    let mean = pickup.iter().sum::<f64>() / pickup.len() as f64;
    for dp in &pickup {
        assert!((dp - mean).abs() <= 0.02 * mean.abs(), "pickup {dp} vs mean {mean}");
    }
    for d in traj.survivors().filter(|d| d.kind == DeviceKind::Sm) {
        let dw = d.freq[d.len() - 1] - d.freq[k0];
        let dp = d.p[d.len() - 1] - d.p[k0 - 1];
        assert!((dp + dw / r).abs() <= 0.01 * dp.abs(), "SM{} dp {dp} vs droop {}", d.unit_id, -dw / r);
    }
}
