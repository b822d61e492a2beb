//! Experiment runner around the `bnet` library: configuration files, run
//! directories with manifests, CSV traces, seed benchmarks and checkpoint
//! evaluation.

pub mod commands;
pub mod config;
pub mod output;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Bnet(#[from] bnet::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("cannot serialize config: {0}")]
    TomlSer(#[from] toml::ser::Error),
}

/// Environment variable naming the default output root.
pub const OUTPUT_DIR_VAR: &str = "BNET_OUTPUT_DIR";
