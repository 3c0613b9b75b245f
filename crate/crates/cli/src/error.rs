use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] diffgt::Error),

    #[error("{path}: {source}")]
    Toml {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },

    #[error("{0}")]
    Usage(String),

    #[error("{source}; last finite parameters written to {}", dump.display())]
    Diverged {
        #[source]
        source: diffgt::Error,
        dump: PathBuf,
    },
}

impl CliError {
    /// 2 input error, 3 numerical divergence, 4 integrity mismatch.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) => match e {
                diffgt::Error::Divergence { .. } | diffgt::Error::NonFinite(_) => 3,
                diffgt::Error::Integrity(_) => 4,
                _ => 2,
            },
            CliError::Diverged { .. } => 3,
            CliError::Toml { .. } | CliError::Usage(_) => 2,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
