//! Front end for the `dispersive-eo` binary: settings files, commands and
//! output formats.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use error::{CliError, Result};
