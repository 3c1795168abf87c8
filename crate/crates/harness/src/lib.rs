//! Experiment orchestration for the massive MU-MIMO impairment simulator:
//! trial pipeline assembly, parameter sweeps, stochastic-model calibration,
//! named presets, and CSV output. The `masim` binary is a thin CLI over this
//! library.

pub mod calibrate;
pub mod config;
pub mod error;
pub mod experiments;
pub mod presets;
pub mod report;
pub mod sweep;
pub mod trial;

pub use config::TrialConfig;
pub use error::{HarnessError, Result};
