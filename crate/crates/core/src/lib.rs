//! Simulation and analysis toolkit for a cold-atom cloud falling through a
//! fiber-coupled Fabry-Perot microcavity: coupling-rate algebra, mode-field
//! weighting, Monte Carlo time of flight, the reflection lineshape, photon
//! counting statistics, and scan fitting.

pub mod cavity_core;
pub mod cloud_mc;
pub mod config;
pub mod constants;
pub mod detector_chain;
pub mod error;
pub mod fitting;
pub mod mode_field;
pub mod output;
pub mod reflection;
pub mod rng;
pub mod scenario;

pub use config::ScenarioConfig;
pub use error::{Error, Result};
