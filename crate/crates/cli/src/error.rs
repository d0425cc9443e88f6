//! Error-to-exit-code mapping: 0 success, 1 usage, 2 data, 3 divergence.

use std::fmt;

use kgam_core::dataset::DataError;
use kgam_core::embedding::EmbedError;
use kgam_core::kgam::{KgamError, TrainError};
use kgam_core::koppen::KoppenError;
use kgam_core::smoothers::SmootherError;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Divergence(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        Self::Usage(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Self::Data(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 1,
            Self::Data(_) => 2,
            Self::Divergence(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Usage(m) => write!(f, "usage error: {m}"),
            Self::Data(m) => write!(f, "data error: {m}"),
            Self::Divergence(m) => write!(f, "training diverged: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Data(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::Data(e.to_string())
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        Self::Data(e.to_string())
    }
}

impl From<KoppenError> for CliError {
    fn from(e: KoppenError) -> Self {
        Self::Data(e.to_string())
    }
}

impl From<EmbedError> for CliError {
    fn from(e: EmbedError) -> Self {
        Self::Data(e.to_string())
    }
}

impl From<KgamError> for CliError {
    fn from(e: KgamError) -> Self {
        Self::Data(e.to_string())
    }
}

impl From<SmootherError> for CliError {
    fn from(e: SmootherError) -> Self {
        Self::Data(e.to_string())
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Diverged { .. } => Self::Divergence(e.to_string()),
            TrainError::Model(m) => Self::Data(m.to_string()),
        }
    }
}
