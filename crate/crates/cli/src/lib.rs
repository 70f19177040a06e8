//! Configuration and subcommands of the `layerfield` experiment driver.

pub mod commands;
pub mod config;
