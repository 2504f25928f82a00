use std::time::Duration;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("format error: {0}")]
    Format(String),

    #[error("unsupported bit depth: {0}")]
    UnsupportedDepth(String),

    #[error("truncated image data: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("matrix is not positive definite (pivot {pivot:e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("matrix is not positive semi-definite (eigenvalue {eigenvalue:e}, trace {trace:e})")]
    NotPsd { eigenvalue: f64, trace: f64 },

    #[error("matrix is singular: {0}")]
    Singular(String),

    #[error("empty image: statistics need at least one pixel")]
    EmptyImage,

    #[error("degenerate color statistics: {0}")]
    DegenerateStats(String),

    #[error("degenerate luminance: style standard deviation {std:e} is too small")]
    DegenerateLuminance { std: f64 },

    #[error("invalid styler spec: {0}")]
    InvalidSpec(String),

    #[error("styler command failed ({status}): {diagnostics}")]
    StylerFailed { status: String, diagnostics: String },

    #[error("styler command timed out after {0:?}")]
    Timeout(Duration),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Wraps the error with the name of the pipeline stage it came from.
    pub fn at(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Strips any stage labels.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }

    pub fn stage(&self) -> Option<&'static str> {
        match self {
            Error::Stage { stage, .. } => Some(stage),
            _ => None,
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.at(stage))
    }
}
