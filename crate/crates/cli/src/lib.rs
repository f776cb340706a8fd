//! Library side of the `resetctl` command-line tool: configuration,
//! CSV output and the subcommand drivers.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod plot;
pub mod table;

pub use error::{CliError, CliResult};
