//! Batch front end for the `nvcavity` simulator: TOML configuration, grid
//! orchestration and CSV/JSON emission with a hashed manifest.

pub mod config;
pub mod error;
pub mod output;
pub mod run;

pub use config::{parse_config, Format, Mode, RunConfig};
pub use error::{CliError, Result};
pub use run::{run, RunOptions, RunSummary};
