use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("cannot read {}: {source}", path.display())]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("cannot write {}: {source}", path.display())]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Model(#[from] dispersive_eo::Error),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    /// 2 for anything the user can fix in the configuration, 3 for failures
    /// of the numerics themselves.
    pub fn exit_code(&self) -> i32 {
        use dispersive_eo::Error as E;
        match self {
            CliError::Model(E::Integration { .. })
            | CliError::Model(E::NumericalHealth(_))
            | CliError::Model(E::UndefinedConditionalState { .. }) => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
