//! Phasor-domain dynamic simulation of a transmission grid in which
//! synchronous machines are progressively replaced by grid-forming
//! droop-controlled converters.

pub mod config;
pub mod converter;
pub mod error;
pub mod machine;
pub mod metrics;
pub mod network;
pub mod output;
pub mod sim;
pub mod sweep;
pub mod topology;
pub mod transition;
pub mod units;

pub use error::{GridError, Result};
pub use topology::Topology;
