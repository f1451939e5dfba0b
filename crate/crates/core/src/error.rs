use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors surfaced by the analysis pipeline.
///
/// Every variant maps onto a stable machine-readable [`Error::code`] used by
/// the CLI error records and the HTTP API.
#[derive(Debug, Error)]
pub enum Error {
    #[error("input contract violated: {0}")]
    InputContract(String),

    #[error("degenerate calibration: reference points coincide")]
    DegenerateCalibration,

    #[error("calibration missing: a scale calibration is required")]
    CalibrationMissing,

    #[error("insufficient data: need at least {needed} usable points, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation error at line {line}: {message}")]
    Validation { line: usize, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("conflict: {0}")]
    Conflict(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::InputContract(_) => "input_contract",
            Error::DegenerateCalibration => "degenerate_calibration",
            Error::CalibrationMissing => "calibration_missing",
            Error::InsufficientData { .. } => "insufficient_data",
            Error::Parse { .. } => "parse_error",
            Error::Validation { .. } => "validation_error",
            Error::Config(_) => "config_error",
            Error::NotFound(_) => "not_found",
            Error::Conflict(_) => "conflict",
            Error::Io(_) => "io_error",
        }
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::InputContract(msg.into())
    }
}
