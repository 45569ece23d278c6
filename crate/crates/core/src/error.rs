use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = GridError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("network is not connected: bus {0} is unreachable")]
    Disconnected(usize),

    #[error("singular network matrix ({0})")]
    SingularNetwork(String),

    #[error("power flow did not converge after {iterations} iterations (mismatch {mismatch:.3e} pu)")]
    PowerFlowDiverged { iterations: usize, mismatch: f64 },

    #[error("voltage out of range at bus {bus}: |v| = {vmag:.4} pu")]
    VoltageOutOfRange { bus: usize, vmag: f64 },

    #[error("infeasible operating point for unit {unit}: {reason}")]
    InfeasibleEquilibrium { unit: usize, reason: String },

    #[error("numerical blow-up at t = {t:.4} s: {reason}")]
    BlowUp { t: f64, reason: String },

    #[error("event error: {0}")]
    Event(String),

    #[error("metric error: {0}")]
    Metric(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl GridError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        GridError::Io {
            path: path.into(),
            source,
        }
    }
}
