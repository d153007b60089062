//! Scenario parsing and the commands behind the `lsnsum` binary.

pub mod commands;
mod error;
pub mod network;
pub mod scenario;

pub use error::CliError;
