#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Command-line front end: run configuration, manifests, graph export and the
//! subcommand runners behind the `sicspin` binary.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod graph;
pub mod manifest;
pub mod reproduce;

pub use args::Cli;
pub use commands::run;
pub use config::RunConfig;
pub use error::{CliError, CliResult};
