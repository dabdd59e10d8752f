//! Command-line pipeline around `dfm-core`: CSV panels, TOML run
//! configuration, artifact writers and the synthetic-data generator.

pub mod config;
pub mod csvio;
pub mod error;
pub mod format;
pub mod pipeline;
pub mod report;
pub mod simulate;

pub use config::{LoadedConfig, RunConfig};
pub use error::{CliError, Result};
pub use pipeline::{run, RunArtifacts, RunOverrides, Stage};
