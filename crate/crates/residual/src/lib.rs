//! File formats and the `residual` command-line tool.
//!
//! Numerics live in [`residual_core`]; this crate reads operators, data and
//! samples from CSV, parses `key = value` configs, and writes CSV/JSON
//! reports with 17 significant digits so reruns are byte-identical.

pub mod cli;
pub mod config;
pub mod error;
pub mod format;
pub mod io;

pub use error::{CliError, ExitCode};
