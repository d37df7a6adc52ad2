//! Experiment harness: configuration, subcommands and CSV output.

pub mod commands;
pub mod config;
pub mod output;
