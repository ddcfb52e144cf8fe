//! Files, configuration, experiment orchestration and the `gampsi` command
//! line, built on `gampsi-core`.

pub mod calibrate;
pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod manifest;
pub mod study;

pub use config::{Config, DenoiserKind};
pub use error::{Error, Result};
