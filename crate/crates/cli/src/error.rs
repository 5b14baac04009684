use std::path::Path;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Data(_) => "data",
            CliError::Numerical(_) => "numerical",
        }
    }
}

impl From<netgm::Error> for CliError {
    fn from(e: netgm::Error) -> Self {
        if e.is_input_error() {
            CliError::Data(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    exit_code: i32,
    kind: &'a str,
    message: String,
}

/// Writes `error.json` into `dir`, creating it if needed.
pub fn write_error_file(dir: &Path, err: &CliError) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let report = ErrorReport {
        exit_code: err.exit_code(),
        kind: err.kind(),
        message: err.to_string(),
    };
    let text = serde_json::to_string_pretty(&report).map_err(std::io::Error::other)?;
    std::fs::write(dir.join("error.json"), text + "\n")
}
