use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviceKind {
    Sm,
    Gfc,
}

impl DeviceKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DeviceKind::Sm => "sm",
            DeviceKind::Gfc => "gfc",
        }
    }
}

impl std::str::FromStr for DeviceKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sm" => Ok(DeviceKind::Sm),
            "gfc" => Ok(DeviceKind::Gfc),
            other => Err(format!("unknown device kind `{other}`")),
        }
    }
}

/// Recorded signals of one device. A tripped device's vectors end at the
/// sample before its removal.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceTrace {
    pub unit_id: usize,
    pub kind: DeviceKind,
    /// SM mechanical frequency or GFC internal frequency, pu.
    pub freq: Vec<f64>,
    /// Active power on the device rating, pu.
    pub p: Vec<f64>,
    /// Terminal bus voltage magnitude, pu.
    pub vmag: Vec<f64>,
}

impl DeviceTrace {
    pub fn len(&self) -> usize {
        self.freq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freq.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub bus_ids: Vec<usize>,
    /// Bus voltage magnitudes per sample, in `bus_ids` order.
    pub bus_vmag: Vec<Vec<f64>>,
    pub devices: Vec<DeviceTrace>,
    pub t_event: Option<f64>,
    /// Largest active-power balance residual over all samples, system pu.
    pub max_balance_residual: f64,
}

impl Trajectory {
    pub fn sample_period(&self) -> Option<f64> {
        (self.times.len() >= 2).then(|| self.times[1] - self.times[0])
    }

    pub fn device(&self, unit_id: usize, kind: DeviceKind) -> Option<&DeviceTrace> {
        self.devices.iter().find(|d| d.unit_id == unit_id && d.kind == kind)
    }

    /// Devices still connected at the last sample.
    pub fn survivors(&self) -> impl Iterator<Item = &DeviceTrace> {
        let n = self.times.len();
        self.devices.iter().filter(move |d| d.len() == n)
    }

    /// Index of the sample at time `t`, if one exists.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let tol = 1e-6 * self.sample_period().unwrap_or(1.0);
        self.times.iter().position(|&s| (s - t).abs() <= tol)
    }

    /// Largest pairwise frequency difference among survivors at the end.
    pub fn final_spread(&self) -> f64 {
        let last: Vec<f64> = self.survivors().filter_map(|d| d.freq.last().copied()).collect();
        let hi = last.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = last.iter().copied().fold(f64::INFINITY, f64::min);
        if last.is_empty() {
            0.0
        } else {
            hi - lo
        }
    }

    /// Mean final frequency deviation of the survivors relative to their
    /// value at `t0`.
    pub fn steady_state_deviation(&self, t0: f64) -> Option<f64> {
        let k0 = self.index_of(t0)?;
        let devs: Vec<f64> = self
            .survivors()
            .map(|d| d.freq[d.len() - 1] - d.freq[k0])
            .collect();
        (!devs.is_empty()).then(|| devs.iter().sum::<f64>() / devs.len() as f64)
    }
}
