//! File formats, experiment configs, the experiment runner and the sweep
//! driver behind the `ecn-lab` command.

pub mod config;
pub mod error;
pub mod io;
pub mod presets;
pub mod runner;
pub mod sweep;

pub use crate::error::{LabError, Result};
