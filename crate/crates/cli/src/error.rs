use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("bad configuration: {0}")]
    Config(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("{0}")]
    Numeric(honeycomb_berry::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numeric(_) | CliError::Io { .. } | CliError::Csv { .. } => 3,
        }
    }
}

impl From<honeycomb_berry::Error> for CliError {
    fn from(e: honeycomb_berry::Error) -> Self {
        match e {
            honeycomb_berry::Error::InvalidParameter(msg) => CliError::Config(msg),
            other => CliError::Numeric(other),
        }
    }
}
