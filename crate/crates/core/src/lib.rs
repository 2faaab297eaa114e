//! Fleet simulator for learning-based reheat control of stratified
//! hot-water vessels.
//!
//! - [`vessel`]: multi-layer thermal model with plug-flow draws.
//! - [`occupants`]: stochastic draw profiles.
//! - [`sensing`]: noisy temperature sensors.
//! - [`model_learning`]: binned transition model with physical constraints.
//! - [`exploration`]: visit counts, coverage and exploration policies.
//! - [`control`]: thermostat baseline and receding-horizon planner.
//! - [`harness`]: experiments, metrics and CSV output.

pub mod binning;
pub mod control;
pub mod error;
pub mod exploration;
pub mod harness;
pub mod isotonic;
pub mod model_learning;
pub mod occupants;
pub mod sensing;
pub mod vessel;

pub use error::{Error, Result};
