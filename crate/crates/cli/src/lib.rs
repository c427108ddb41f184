//! Command-line driver: stability-based selection of the number of
//! clusters, held-out evaluation, grid search and internal indices, all
//! driven by one JSON config.

pub mod commands;
pub mod config;
pub mod svg;

pub use commands::{run, Command, Failure, Options};
pub use config::RunConfig;
