use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the detection and classification pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("length error: {0}")]
    Length(String),

    #[error("unsupported shape: {0}")]
    UnsupportedShape(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("index {index} out of range for length {len}")]
    Index { index: usize, len: usize },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("training diverged at epoch {epoch} (loss = {loss})")]
    Divergence { epoch: usize, loss: f64 },

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True when the error (or the error a stage wraps) is a numerical divergence.
    pub fn is_divergence(&self) -> bool {
        match self {
            Error::Divergence { .. } => true,
            Error::Stage { source, .. } => source.is_divergence(),
            _ => false,
        }
    }
}

/// Attach a pipeline stage name to errors coming out of that stage.
pub(crate) trait StageContext<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageContext<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| Error::Stage {
            stage,
            source: Box::new(e),
        })
    }
}
