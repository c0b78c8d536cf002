//! File formats, checkpoints and the command-line front end for the
//! `cascade-core` pipeline.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod error;
pub mod formats;

pub use error::{CliError, Result};
