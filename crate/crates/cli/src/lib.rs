//! Command-line front end: configuration, fit workflows, archives and
//! exports. The binary in `main.rs` only parses arguments and maps errors
//! to exit codes.

pub mod archive;
pub mod commands;
pub mod config;
pub mod error;
pub mod export;
pub mod run;

pub use archive::SolutionArchive;
pub use config::{ExportFormat, Method, RunConfig};
pub use error::CliError;
