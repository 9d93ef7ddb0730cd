//! Configuration, manifests and the experiment commands behind `lfrelay`.

pub mod config;
pub mod error;
pub mod manifest;
pub mod run;

pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};
pub use manifest::RunManifest;
pub use run::{execute, rerun, RunSpec};
