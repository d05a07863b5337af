//! Discrete-event simulator of a UAV-mounted 802.11 access point collecting
//! uplink traffic from a ground sensor grid.
//!
//! The crate is split the way a run flows: [`scenario`] builds the
//! configuration, [`sim`] drives [`engine`], [`mobility`], [`phy`], [`mac`]
//! and [`traffic`], and [`metrics`] turns the counters into CSV rows.

pub mod engine;
pub mod error;
pub mod geom;
pub mod mac;
pub mod metrics;
pub mod mobility;
pub mod phy;
pub mod scenario;
pub mod sim;
pub mod traffic;

#[cfg(feature = "cli")]
pub mod cli;

pub use engine::{rng_stream, SimTime};
pub use scenario::{parse_scenario, Scenario};
pub use sim::{run, RunReport, SimOptions};
