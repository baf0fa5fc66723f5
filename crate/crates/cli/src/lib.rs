//! Command-line front end: configuration files, sweeps, optimization runs,
//! validation reports, and CSV/SVG output.

pub mod app;
pub mod commands;
pub mod config;
pub mod svg;
pub mod sweep;
pub mod table;
pub mod validate;

pub use commands::{CliError, Output};
pub use config::{ConfigError, RunConfig};
