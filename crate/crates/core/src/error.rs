use std::path::PathBuf;

use thiserror::Error;

/// Every failure the library can report.
///
/// Variants group into three families that the CLI and the HTTP service map
/// to exit codes / status codes: validation-like (`Schema`, `Validation`, the
/// domain errors), IO (`Io`, `Format`), and internal.
#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("no static region: the moving mask covers every pixel")]
    NoStaticRegion,

    #[error("no pixels available to average depth for object {object_id}")]
    EmptyMask { object_id: u32 },

    #[error("object {object_id} is behind the camera at frame {frame}")]
    BehindCamera { object_id: u32, frame: usize },

    #[error("local track start {x:.3},{y:.3} lies outside the frame-0 box of parent {parent}")]
    OutsideParent { parent: u32, x: f64, y: f64 },

    #[error("index {index} out of range for length {len}")]
    Index { index: usize, len: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),

    #[error("non-positive depth {value} at ({x}, {y})")]
    NonPositiveDepth { x: usize, y: usize, value: f64 },

    #[error("format error in {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by reading or writing files rather than by the
    /// content of a design.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. } | Error::Format { .. })
    }

    /// Process exit code used by the CLI: 1 for IO failures, 2 for everything
    /// the caller can fix by changing the inputs.
    pub fn exit_code(&self) -> i32 {
        if self.is_io() {
            1
        } else {
            2
        }
    }
}
