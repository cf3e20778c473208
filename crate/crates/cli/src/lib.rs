//! Scenario files, runs and artifact emission for the `cpwave` tool.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod output;
pub mod run;

pub use config::ScenarioConfig;
pub use error::CliError;
pub use run::{execute, Command, RunArtifacts, MANIFEST};
