use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = PnnError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum PnnError {
    #[error("{op}: dimension mismatch, left {left:?} vs right {right:?}")]
    DimensionMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),

    #[error("arch syntax error at position {position}: {message}")]
    ArchSyntax { position: usize, message: String },

    #[error("{path}: IDX format error at byte offset {offset}: {message}")]
    IdxFormat {
        path: PathBuf,
        offset: usize,
        message: String,
    },

    #[error("checkpoint format error: {0}")]
    CheckpointFormat(String),

    #[error("report format error: {0}")]
    ReportFormat(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl PnnError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        PnnError::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag, used for the CLI's error line and FFI status mapping.
    pub fn kind(&self) -> &'static str {
        match self {
            PnnError::DimensionMismatch { .. } => "dimension_mismatch",
            PnnError::InvalidArgument(_) => "invalid_argument",
            PnnError::InvalidArchitecture(_) => "invalid_architecture",
            PnnError::ArchSyntax { .. } => "arch_syntax",
            PnnError::IdxFormat { .. } => "idx_format",
            PnnError::CheckpointFormat(_) => "checkpoint_format",
            PnnError::ReportFormat(_) => "report_format",
            PnnError::Io { .. } => "io",
        }
    }
}
