//! File formats, configuration, parallel simulation and the command-line front end
//! for `policybound-core`.

pub mod app_panel;
pub mod cli;
pub mod config;
pub mod csvio;
pub mod error;
pub mod report;
pub mod study;
pub mod svg;

pub use cli::dispatch;
pub use csvio::{load_panel, write_panel, Schema};
pub use error::CliError;
pub use study::run_study;
