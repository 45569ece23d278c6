//! Post-contingency frequency metrics: nadir, two-point RoCoF over a
//! window, and normalization against the all-machine baseline.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{GridError, Result};
use crate::sim::{DeviceKind, DeviceTrace, EventKind, Trajectory};

/// Sample-time tolerance as a fraction of the sample period.
const TIME_TOL: f64 = 1e-6;

fn sample_period(times: &[f64]) -> Result<f64> {
    match times {
        [a, b, ..] if b > a => Ok(b - a),
        _ => Err(GridError::Metric("trace needs at least two increasing samples".into())),
    }
}

fn index_of(times: &[f64], t: f64) -> Result<usize> {
    let h = sample_period(times)?;
    let k = ((t - times[0]) / h).round();
    if k < 0.0 || k as usize >= times.len() || (times[k as usize] - t).abs() > TIME_TOL * h {
        return Err(GridError::Metric(format!("t0 = {t} is not a sample of the trace")));
    }
    Ok(k as usize)
}

/// Largest absolute deviation from the value at `t0` over all samples at or
/// after `t0`.
pub fn nadir(times: &[f64], omega: &[f64], t0: f64) -> Result<f64> {
    if times.len() != omega.len() {
        return Err(GridError::Metric("time and value lengths differ".into()));
    }
    let k0 = index_of(times, t0)?;
    if k0 + 1 >= times.len() {
        return Err(GridError::Metric("no samples after t0".into()));
    }
    let w0 = omega[k0];
    Ok(omega[k0..].iter().fold(0.0, |m, w| m.max((w0 - w).abs())))
}

/// `|omega(t0 + T) - omega(t0)| / T`, with no smoothing.
pub fn rocof(times: &[f64], omega: &[f64], t0: f64, window: f64) -> Result<f64> {
    if times.len() != omega.len() {
        return Err(GridError::Metric("time and value lengths differ".into()));
    }
    if !(window > 0.0) {
        return Err(GridError::Metric("RoCoF window must be positive".into()));
    }
    let h = sample_period(times)?;
    let steps = window / h;
    if (steps - steps.round()).abs() > TIME_TOL * steps.max(1.0) {
        return Err(GridError::Metric(format!(
            "window {window} s is not a multiple of the sample period {h} s"
        )));
    }
    let k0 = index_of(times, t0)?;
    let k1 = k0 + steps.round() as usize;
    if k1 >= times.len() {
        return Err(GridError::Metric(format!("window {window} s runs past the end of the trace")));
    }
    Ok((omega[k1] - omega[k0]).abs() / window)
}

/// First-order low-pass filter, started at the first sample.
pub fn low_pass(values: &[f64], sample_period: f64, cutoff_hz: f64) -> Vec<f64> {
    let alpha = 1.0 - (-2.0 * PI * cutoff_hz * sample_period).exp();
    let mut out = Vec::with_capacity(values.len());
    let mut y = match values.first() {
        Some(&v) => v,
        None => return out,
    };
    for &v in values {
        y += alpha * (v - y);
        out.push(y);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitMetrics {
    pub unit_id: usize,
    /// Which frequency the metrics were computed on.
    pub source: DeviceKind,
    pub nadir: f64,
    /// One entry per window of the report.
    pub rocof: Vec<f64>,
    pub normalized_nadir: Option<f64>,
    pub normalized_rocof: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub eta: f64,
    pub event: EventKind,
    pub windows: Vec<f64>,
    pub units: Vec<UnitMetrics>,
}

impl MetricsReport {
    pub fn unit(&self, id: usize) -> Option<&UnitMetrics> {
        self.units.iter().find(|u| u.unit_id == id)
    }

    pub fn window_index(&self, window: f64) -> Option<usize> {
        self.windows.iter().position(|w| (w - window).abs() < 1e-12)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricOptions {
    pub windows: Vec<f64>,
    /// Optional low-pass cutoff applied before the nadir search, Hz.
    pub nadir_filter_hz: Option<f64>,
}

impl Default for MetricOptions {
    fn default() -> Self {
        Self {
            windows: vec![0.1, 0.5],
            nadir_filter_hz: None,
        }
    }
}

/// Frequency used for a unit's metrics: the machine when one exists at the
/// unit, the converter otherwise.
pub fn metric_trace(traj: &Trajectory, unit_id: usize) -> Option<&DeviceTrace> {
    traj.device(unit_id, DeviceKind::Sm)
        .or_else(|| traj.device(unit_id, DeviceKind::Gfc))
}

/// Raw metrics for every unit that survives the whole horizon.
pub fn compute_metrics(
    traj: &Trajectory,
    eta: f64,
    event: EventKind,
    t0: f64,
    opts: &MetricOptions,
) -> Result<MetricsReport> {
    let mut ids: Vec<usize> = traj.survivors().map(|d| d.unit_id).collect();
    ids.sort_unstable();
    ids.dedup();
    let h = traj
        .sample_period()
        .ok_or_else(|| GridError::Metric("trajectory has fewer than two samples".into()))?;
    let mut units = Vec::with_capacity(ids.len());
    for id in ids {
        let trace = metric_trace(traj, id).expect("survivor has a trace");
        let nadir_input = match opts.nadir_filter_hz {
            Some(fc) => low_pass(&trace.freq, h, fc),
            None => trace.freq.clone(),
        };
        let rocof = opts
            .windows
            .iter()
            .map(|&w| rocof(&traj.times, &trace.freq, t0, w))
            .collect::<Result<Vec<_>>>()?;
        units.push(UnitMetrics {
            unit_id: id,
            source: trace.kind,
            nadir: nadir(&traj.times, &nadir_input, t0)?,
            normalized_rocof: vec![None; rocof.len()],
            rocof,
            normalized_nadir: None,
        });
    }
    Ok(MetricsReport {
        eta,
        event,
        windows: opts.windows.clone(),
        units,
    })
}

fn ratio(value: f64, baseline: f64, what: &str, unit: usize) -> Result<f64> {
    if baseline == 0.0 {
        return Err(GridError::Metric(format!("zero baseline {what} for unit {unit}")));
    }
    Ok(value / baseline)
}

/// Divides every metric by the same unit's metric in `baseline`.
pub fn normalize_metrics(report: &MetricsReport, baseline: &MetricsReport) -> Result<MetricsReport> {
    if report.event != baseline.event {
        return Err(GridError::Metric(format!(
            "event mismatch: {} vs baseline {}",
            report.event, baseline.event
        )));
    }
    if report.windows != baseline.windows {
        return Err(GridError::Metric("RoCoF windows differ from the baseline".into()));
    }
    let mut out = report.clone();
    for u in &mut out.units {
        let b = baseline
            .unit(u.unit_id)
            .ok_or_else(|| GridError::Metric(format!("unit {} missing from baseline", u.unit_id)))?;
        u.normalized_nadir = Some(ratio(u.nadir, b.nadir, "nadir", u.unit_id)?);
        u.normalized_rocof = u
            .rocof
            .iter()
            .zip(&b.rocof)
            .map(|(v, bv)| ratio(*v, *bv, "RoCoF", u.unit_id).map(Some))
            .collect::<Result<_>>()?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, h: f64) -> Vec<f64> {
        (0..n).map(|k| k as f64 * h).collect()
    }

    #[test]
    fn constant_trace() {
        let t = grid(200, 0.01);
        let w = vec![1.0; 200];
        assert_eq!(nadir(&t, &w, 0.5).unwrap(), 0.0);
        for window in [0.1, 0.5, 1.0] {
            assert_eq!(rocof(&t, &w, 0.5, window).unwrap(), 0.0);
        }
    }

    #[test]
    fn dip_and_recovery() {
        let t = grid(300, 0.01);
        let w: Vec<f64> = t
            .iter()
            .map(|&s| {
                if s < 1.0 {
                    1.0
                } else if s < 1.5 {
                    1.0 - 0.004 * (s - 1.0) / 0.5
                } else {
                    (1.0 - 0.004 + 0.002 * (s - 1.5) / 0.5).min(1.0 - 0.002)
                }
            })
            .collect();
        assert!((nadir(&t, &w, 1.0).unwrap() - 0.004).abs() < 1e-15);
    }

    #[test]
    fn overdamped_nadir_equals_steady_deviation() {
        let t = grid(1000, 0.01);
        let w: Vec<f64> = t.iter().map(|&s| 1.0 - 0.003 * (1.0 - (-(s - 1.0).max(0.0) / 0.05).exp())).collect();
        let n = nadir(&t, &w, 1.0).unwrap();
        assert!((n - (1.0 - w[999])).abs() < 1e-15);
        assert!((n - 0.003).abs() < 1e-12);
    }

    #[test]
    fn ramp_rocof_is_exact() {
        let t = grid(200, 0.01);
        let w: Vec<f64> = t.iter().map(|&s| 1.0 - 0.01 * (s - 0.5).max(0.0)).collect();
        for window in [0.1, 0.5, 1.0] {
            assert!((rocof(&t, &w, 0.5, window).unwrap() - 0.01).abs() < 1e-12);
        }
    }

    #[test]
    fn two_point_rocof_ignores_inner_dip() {
        let t = grid(200, 0.01);
        let w: Vec<f64> = t
            .iter()
            .map(|&s| if s > 0.5 && s < 1.0 { 1.0 - 0.01 * (PI * (s - 0.5) / 0.5).sin() } else { 1.0 })
            .collect();
        assert_eq!(rocof(&t, &w, 0.5, 0.5).unwrap(), 0.0);
        assert!(rocof(&t, &w, 0.5, 0.1).unwrap() > 0.0);
    }

    #[test]
    fn misaligned_or_out_of_range() {
        let t = grid(100, 0.01);
        let w = vec![1.0; 100];
        assert!(rocof(&t, &w, 0.5, 0.015).is_err());
        assert!(rocof(&t, &w, 0.5, 0.6).is_err());
        assert!(nadir(&t, &w, 2.0).is_err());
        assert!(nadir(&t, &w, 0.505).is_err());
        assert!(nadir(&t, &w, 0.99).is_err());
    }

    fn report(scale: f64) -> MetricsReport {
        MetricsReport {
            eta: 0.0,
            event: EventKind::TripHvdc,
            windows: vec![0.1, 0.5],
            units: vec![
                UnitMetrics {
                    unit_id: 1,
                    source: DeviceKind::Sm,
                    nadir: 0.004 * scale,
                    rocof: vec![0.02 * scale, 0.01 * scale],
                    normalized_nadir: None,
                    normalized_rocof: vec![None, None],
                },
                UnitMetrics {
                    unit_id: 5,
                    source: DeviceKind::Sm,
                    nadir: 0.006 * scale,
                    rocof: vec![0.05 * scale, 0.012 * scale],
                    normalized_nadir: None,
                    normalized_rocof: vec![None, None],
                },
            ],
        }
    }

    #[test]
    fn self_baseline_is_one() {
        let r = report(1.0);
        let n = normalize_metrics(&r, &r).unwrap();
        for u in &n.units {
            assert_eq!(u.normalized_nadir, Some(1.0));
            assert!(u.normalized_rocof.iter().all(|v| *v == Some(1.0)));
        }
    }

    #[test]
    fn halved_nadir() {
        let base = report(1.0);
        let mut r = report(1.0);
        r.units[0].nadir = 0.002;
        let n = normalize_metrics(&r, &base).unwrap();
        assert_eq!(n.units[0].normalized_nadir, Some(0.5));
    }

    #[test]
    fn scale_invariance() {
        let mut r = report(1.0);
        r.units[0].nadir = 0.003;
        let base = report(1.3);
        let a = normalize_metrics(&r, &base).unwrap();
        let mut r7 = r.clone();
        for u in &mut r7.units {
            u.nadir *= 7.0;
            u.rocof.iter_mut().for_each(|v| *v *= 7.0);
        }
        let mut base7 = base.clone();
        for u in &mut base7.units {
            u.nadir *= 7.0;
            u.rocof.iter_mut().for_each(|v| *v *= 7.0);
        }
        let b = normalize_metrics(&r7, &base7).unwrap();
        for (x, y) in a.units.iter().zip(&b.units) {
            assert!((x.normalized_nadir.unwrap() - y.normalized_nadir.unwrap()).abs() < 1e-12);
            for (p, q) in x.normalized_rocof.iter().zip(&y.normalized_rocof) {
                assert!((p.unwrap() - q.unwrap()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_baseline_rejected() {
        let mut base = report(1.0);
        base.units[1].nadir = 0.0;
        assert!(normalize_metrics(&report(1.0), &base).is_err());
    }

    #[test]
    fn low_pass_converges_to_step() {
        let step = vec![1.0; 1];
        let mut v = vec![0.0; 1];
        v.extend(std::iter::repeat(1.0).take(2000));
        let y = low_pass(&v, 0.001, 5.0);
        assert_eq!(y[0], 0.0);
        assert!((y[2000] - step[0]).abs() < 1e-10);
        assert!(y.windows(2).all(|w| w[1] >= w[0]));
    }
}
