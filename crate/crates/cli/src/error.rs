//! CLI error channel with exit-status mapping: 2 for usage/config problems,
//! 3 for runtime failures. Every error prints as a line prefixed `error:`.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }

    pub fn runtime(err: impl std::fmt::Display) -> Self {
        CliError::Runtime(err.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

macro_rules! runtime_from {
    ($($ty:ty),*) => {
        $(impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError::Runtime(e.to_string())
            }
        })*
    };
}

runtime_from!(
    std::io::Error,
    serde_json::Error,
    fairwash_core::dataspace::DataError,
    fairwash_core::blackbox::BlackBoxError,
    fairwash_core::explainers::ExplainerError,
    fairwash_core::fairtrain::FairtrainError,
    fairwash_core::attack::AttackError,
    fairwash_core::eval::EvalError,
    fairwash_core::rashomon::RashomonError,
    fairwash_core::metrics::MetricsError
);
