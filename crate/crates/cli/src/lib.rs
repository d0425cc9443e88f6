//! Experiment CLI for K-GAM networks.
//!
//! The binary front-end lives in `main.rs`; everything it does is exposed
//! here so the integration and acceptance suites can drive the same code
//! paths in-process.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod csvio;
pub mod error;

pub use checkpoint::Checkpoint;
pub use config::RunConfig;
pub use error::CliError;
