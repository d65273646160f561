//! File formats, configuration and the `grasped` command-line tool.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod formats;
pub mod gridsearch;

pub use checkpoint::{Checkpoint, CheckpointError};
pub use config::RunConfig;
pub use error::{CliError, Result};
