//! File formats, reports and the `gbeval` command line on top of
//! [`gbeval_core`].

pub mod checkpoint;
pub mod cli;
pub mod commands;
mod error;
pub mod inputs;
pub mod manifest;
pub mod pngio;
pub mod provenance;
pub mod report;
pub mod svg;

pub use error::{Error, Result, EXIT_CONFIG, EXIT_DATA, EXIT_INPUT, EXIT_OK};
