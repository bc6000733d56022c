use std::path::Path;

use hysterlab::epnn::EpnnError;
use hysterlab::excitation::ExcitationError;
use hysterlab::refmodels::RefModelError;
use hysterlab::signals::SignalError;
use hysterlab::training::TrainingError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {message}")]
    File { path: String, message: String },
    #[error("{0}")]
    Usage(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numeric(_) => 1,
            CliError::File { .. } | CliError::Usage(_) => 2,
        }
    }

    pub fn file(path: &Path, message: impl ToString) -> Self {
        CliError::File { path: path.display().to_string(), message: message.to_string() }
    }

    /// Attaches `path` to data and schema errors raised while handling it.
    pub fn at(path: &Path) -> impl Fn(CliError) -> CliError + '_ {
        move |e| match e {
            CliError::Usage(message) => CliError::file(path, message),
            other => other,
        }
    }
}

impl From<SignalError> for CliError {
    fn from(e: SignalError) -> Self {
        match e {
            SignalError::Io { path, source } => CliError::File { path, message: source.to_string() },
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<ExcitationError> for CliError {
    fn from(e: ExcitationError) -> Self {
        match e {
            ExcitationError::Signal(s) => s.into(),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<RefModelError> for CliError {
    fn from(e: RefModelError) -> Self {
        match e {
            RefModelError::Operator(op) => CliError::Numeric(op.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<EpnnError> for CliError {
    fn from(e: EpnnError) -> Self {
        match e {
            EpnnError::ModelFile { path, message } => CliError::File { path, message },
            e @ (EpnnError::Version { .. }
            | EpnnError::MissingRate
            | EpnnError::BadArchitecture
            | EpnnError::LengthMismatch { .. }
            | EpnnError::OutputLength { .. }
            | EpnnError::TooFewSamples { .. }) => CliError::Usage(e.to_string()),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<TrainingError> for CliError {
    fn from(e: TrainingError) -> Self {
        match e {
            TrainingError::Epnn(inner) => inner.into(),
            e @ (TrainingError::MissingTargets | TrainingError::Config(_) | TrainingError::Bounds { .. }) => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Numeric(other.to_string()),
        }
    }
}
