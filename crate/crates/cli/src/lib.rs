//! Configuration, scenario presets and report writing for the
//! `franson-bell` command-line tool.

pub mod config;
pub mod error;
pub mod run;

pub use config::{Overrides, RunConfig};
pub use error::{CliError, Result};
pub use run::{build_report, write_report, Command, Report};
