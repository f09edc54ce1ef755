//! Command-line driver for compound causal tail coefficient analyses.
//!
//! Every command reads a [`RunConfig`] built from a key-value file and flags,
//! and writes CSV/JSON artifacts to the output directory.

pub mod commands;
pub mod config;
pub mod error;
pub mod ingest;

pub use commands::{cmd_benchmark, cmd_profile, cmd_simulate, cmd_test};
pub use config::RunConfig;
pub use error::{CliError, Result};
pub use ingest::{cmd_ingest, Ingested, Schema};
