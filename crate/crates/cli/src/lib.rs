//! Batch driver: configuration, pipeline orchestration and CSV output.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod pipeline;

pub use commands::*;
pub use config::RunConfig;
pub use error::CliError;
