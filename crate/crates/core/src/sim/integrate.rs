use super::{apply_event, Scenario, SimContext, Trajectory};
use crate::error::{GridError, Result};

const BLOW_UP_LIMIT: f64 = 1e6;

fn record(ctx: &SimContext, traj: &mut Trajectory, t: f64) -> Result<()> {
    let sol = ctx.solve_network(&ctx.state)?;
    traj.times.push(t);
    traj.bus_vmag.push(sol.v.iter().map(|v| v.norm()).collect());
    for (k, (d, x)) in ctx.device_states(&ctx.state).enumerate() {
        let v = sol.v[d.bus];
        let i = sol.source_currents[k];
        let trace = &mut traj.devices[d.trace];
        trace.freq.push(d.frequency(x));
        trace.p.push((v * i.conj()).re * ctx.base.s_base / d.s_rating());
        trace.vmag.push(v.norm());
    }
    traj.max_balance_residual = traj.max_balance_residual.max(ctx.balance_residual(&sol).abs());
    Ok(())
}

/// Classical fixed-step RK4 with the network solved inside every stage.
/// The event is applied at the first step boundary at or after its time.
pub fn integrate(ctx: &mut SimContext, scenario: &Scenario) -> Result<Trajectory> {
    scenario.validate()?;
    let dt = scenario.dt;
    let steps = scenario.steps();
    let event_step = scenario.event_step();
    let mut traj = Trajectory {
        times: Vec::with_capacity(steps / scenario.record_decimation + 1),
        bus_ids: ctx.ybus.bus_ids.clone(),
        bus_vmag: Vec::new(),
        devices: ctx.traces.clone(),
        t_event: event_step.map(|k| k as f64 * dt),
        max_balance_residual: 0.0,
    };

    let mut k1 = Vec::new();
    let mut k2 = Vec::new();
    let mut k3 = Vec::new();
    let mut k4 = Vec::new();
    let mut stage = Vec::new();
    for k in 0..=steps {
        let t = k as f64 * dt;
        if Some(k) == event_step {
            if let Some(ev) = &scenario.event {
                apply_event(ctx, ev)?;
            }
        }
        if k % scenario.record_decimation == 0 {
            record(ctx, &mut traj, t)?;
        }
        if k == steps {
            break;
        }
        let n = ctx.state.len();
        for buf in [&mut k1, &mut k2, &mut k3, &mut k4, &mut stage] {
            buf.resize(n, 0.0);
        }
        let x = &ctx.state;
        let wrap = |e: GridError| match e {
            GridError::InvalidParameter(reason) => GridError::BlowUp { t, reason },
            other => other,
        };
        ctx.derivatives(x, &mut k1).map_err(wrap)?;
        for i in 0..n {
            stage[i] = x[i] + 0.5 * dt * k1[i];
        }
        ctx.derivatives(&stage, &mut k2).map_err(wrap)?;
        for i in 0..n {
            stage[i] = x[i] + 0.5 * dt * k2[i];
        }
        ctx.derivatives(&stage, &mut k3).map_err(wrap)?;
        for i in 0..n {
            stage[i] = x[i] + dt * k3[i];
        }
        ctx.derivatives(&stage, &mut k4).map_err(wrap)?;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let v = ctx.state[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            ctx.state[i] = v;
            worst = if v.is_finite() { worst.max(v.abs()) } else { f64::INFINITY };
        }
        if worst > BLOW_UP_LIMIT {
            return Err(GridError::BlowUp {
                t: t + dt,
                reason: format!("state magnitude {worst:.3e}"),
            });
        }
    }
    Ok(traj)
}
