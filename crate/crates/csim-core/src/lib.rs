//! Discrete-event simulator of wireless body area networks (WBANs) coexisting
//! with IoT devices on the 16-channel 2.4 GHz ZigBee band.
//!
//! The crate models two coexistence schemes over the same world:
//!
//! * **CSIM**: coordinators learn which channels are busy nearby from
//!   periodic BLE-style announcements, collect TDMA failures per superframe,
//!   and move interfering sensors onto a stable backup channel chosen either
//!   from the unused pool or, under saturation, by a cognitive-radio style
//!   noise scan.
//! * **SSA**: a baseline that assigns orthogonal channels to every sensor in
//!   the pairwise interference sets of interfering WBANs.
//!
//! [`harness`] drives experiments: single runs, parameter sweeps with
//! replications, and CSV output. The `csim` binary wraps it in a CLI.

pub mod baseline;
pub mod config;
pub mod engine;
pub mod harness;
pub mod metrics;
pub mod protocol;
pub mod runner;
pub mod spectrum;
pub mod world;

pub use config::{ScenarioConfig, Scheme};
pub use engine::{EventQueue, RngStream, SimTime};
pub use harness::{run_experiment, ResultTable, SweepSpec};
pub use runner::{run_scenario, RunOptions, RunOutput};
pub use spectrum::{ChannelId, ChannelSet, NoiseModel};

/// Crate-level error type for configuration, parsing and I/O failures.
///
/// Contract violations inside the simulation core (scheduling into the past,
/// malformed sample vectors) panic instead: they indicate a bug in the
/// caller, not a recoverable condition.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown preset `{0}` (try `csim presets`)")]
    UnknownPreset(String),
    #[error("could not parse configuration: {0}")]
    Parse(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
