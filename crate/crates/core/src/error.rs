use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the forecasting toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("row {row}: cannot parse `{cell}` as a finite number")]
    BadCell { row: usize, cell: String },

    #[error("too few observations: {found} (need at least {needed})")]
    TooFewObservations { found: usize, needed: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error(
        "system is numerically singular after {retries} jitter retries; \
         raise the ridge penalty or lower the polynomial degree"
    )]
    Singular { retries: usize },

    #[error("basis of {count} monomials exceeds the cap of {cap}")]
    BasisTooLarge { count: u128, cap: usize },

    #[error("training diverged at epoch {epoch}: loss is not finite (learning rate too high?)")]
    Diverged { epoch: usize },

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("unsupported schema version {found} (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },

    #[error("{stage} failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Wraps an error with the name of the pipeline stage that raised it.
    pub fn in_stage(self, stage: impl Into<String>) -> Self {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping any stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// Rough classification used by front ends to choose an exit status.
    pub fn kind(&self) -> ErrorKind {
        match self.root() {
            Error::MissingFile(_)
            | Error::Io(_)
            | Error::Csv(_)
            | Error::UnknownColumn(_)
            | Error::BadCell { .. }
            | Error::TooFewObservations { .. } => ErrorKind::Data,
            Error::Singular { .. }
            | Error::Diverged { .. }
            | Error::NonFinite(_)
            | Error::DegenerateSample(_)
            | Error::UndefinedMetric(_) => ErrorKind::Fit,
            Error::Json(_) | Error::SchemaVersion { .. } => ErrorKind::Data,
            Error::InvalidArgument(_) | Error::DimensionMismatch { .. } | Error::BasisTooLarge { .. } => {
                ErrorKind::Config
            }
            Error::Stage { .. } => unreachable!("root() strips stage wrappers"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Fit,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
