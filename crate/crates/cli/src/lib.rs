//! Configuration parsing and subcommand dispatch for the `bpp` binary.

pub mod commands;
pub mod config;

pub use commands::{run, RunError, Status, CAP_ENV};
pub use config::{parse_config, ConfigErrors, RunConfig};
