//! Library side of the `pporpe` command-line tool: configuration files, run
//! manifests, weight files, CSV output, loss surfaces and sweep aggregation.

pub mod config;
pub mod error;
pub mod logs;
pub mod surface;
pub mod sweep;
pub mod weights;

pub use error::CliError;
