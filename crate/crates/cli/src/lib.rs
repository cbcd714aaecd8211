//! Library side of the `affinity` command-line tool.

pub mod bench;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;

pub use config::{Config, Overrides};
pub use error::CliError;
