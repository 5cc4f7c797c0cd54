//! Process-level error taxonomy. Every failure maps to one of three exit
//! codes: 1 for bad invocations and configs, 2 for unreadable or invalid
//! data files, 3 for numeric breakdown inside a model run.

use std::path::{Path, PathBuf};

use ten_core::dist::DistError;
use ten_core::predict::PredictError;
use ten_core::trainer::TrainError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// The command line or config file asks for something nonsensical.
    #[error("{0}")]
    Usage(String),
    /// A data file is missing, unreadable, or fails validation.
    #[error("{}{message}", fmt_path(.path))]
    Data { path: Option<PathBuf>, message: String },
    /// The model produced non-finite numbers.
    #[error("{0}")]
    Numeric(String),
}

fn fmt_path(path: &Option<PathBuf>) -> String {
    match path {
        Some(p) => format!("{}: ", p.display()),
        None => String::new(),
    }
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> CliError {
        CliError::Usage(message.into())
    }

    pub fn data(path: impl AsRef<Path>, message: impl Into<String>) -> CliError {
        CliError::Data {
            path: Some(path.as_ref().to_path_buf()),
            message: message.into(),
        }
    }

    pub fn data_no_path(message: impl Into<String>) -> CliError {
        CliError::Data { path: None, message: message.into() }
    }

    pub fn io(path: impl AsRef<Path>, e: std::io::Error) -> CliError {
        CliError::data(path, e.to_string())
    }

    pub const EXIT_USAGE: i32 = 1;
    pub const EXIT_DATA: i32 = 2;
    pub const EXIT_NUMERIC: i32 = 3;

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => Self::EXIT_USAGE,
            CliError::Data { .. } => Self::EXIT_DATA,
            CliError::Numeric(_) => Self::EXIT_NUMERIC,
        }
    }
}

fn predict_is_numeric(e: &PredictError) -> bool {
    matches!(
        e,
        PredictError::Dist(DistError::NotFinite { .. })
            | PredictError::Dist(DistError::NotNormalized { .. })
            | PredictError::Dist(DistError::NegativeMass { .. })
    )
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match &e {
            TrainError::BadConfig { .. } => CliError::Usage(e.to_string()),
            TrainError::NonFiniteLoss { .. } | TrainError::Optimizer { .. } => {
                CliError::Numeric(e.to_string())
            }
            TrainError::Predict(p) if predict_is_numeric(p) => CliError::Numeric(e.to_string()),
            _ => CliError::data_no_path(e.to_string()),
        }
    }
}

impl From<ten_core::model::ModelError> for CliError {
    fn from(e: ten_core::model::ModelError) -> Self {
        use ten_core::model::ModelError as M;
        match &e {
            M::UnknownVariant { .. } | M::InvalidDims { .. } => CliError::Usage(e.to_string()),
            M::Tape(_) => CliError::Numeric(e.to_string()),
            _ => CliError::data_no_path(e.to_string()),
        }
    }
}

impl From<PredictError> for CliError {
    fn from(e: PredictError) -> Self {
        if predict_is_numeric(&e) {
            CliError::Numeric(e.to_string())
        } else {
            CliError::data_no_path(e.to_string())
        }
    }
}
