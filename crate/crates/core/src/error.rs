use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the simulator and analysis chain.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Two points coincide where a separated pair is required.
    #[error("singular input: {0}")]
    Singular(String),

    /// Scenario or parameter validation failure; `path` names the offending field.
    #[error("invalid configuration at `{path}`: {message}")]
    Config { path: String, message: String },

    /// Malformed input file.
    #[error("{}:{line}: {message}", file.display())]
    Parse {
        file: PathBuf,
        line: usize,
        message: String,
    },

    /// The fixed-step integrator was asked to take a step it cannot take stably.
    #[error("integrator error: {0}")]
    Integrator(String),

    /// A trial produced a non-finite state.
    #[error("trial {trial} aborted: {message}")]
    NonFinite { trial: usize, message: String },

    #[error("fit error: {0}")]
    Fit(String),

    #[error("steady state not found: {0}")]
    SteadyState(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(path: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: msg.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
