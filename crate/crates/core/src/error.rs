use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("feature row {0} has (near) zero norm")]
    ZeroFeatureRow(usize),

    #[error("feature grid is invalid: {0}")]
    InvalidFeatures(String),

    #[error("graph has no edges at tau = {tau}; lower the similarity threshold")]
    EmptyGraph { tau: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("dimension mismatch: {left_w}x{left_h} vs {right_w}x{right_h}")]
    DimensionMismatch {
        left_w: usize,
        left_h: usize,
        right_w: usize,
        right_h: usize,
    },

    #[error("loss became non-finite at epoch {epoch}")]
    DivergedLoss { epoch: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("bad magic at byte offset {offset}: expected \"UNSG\", found {found:?}")]
    BadMagic { offset: usize, found: [u8; 4] },

    #[error("unsupported feature-file version {found} at byte offset {offset} (expected 1)")]
    BadVersion { offset: usize, found: u32 },

    #[error("invalid feature-file header at byte offset {offset}: {reason}")]
    BadHeader { offset: usize, reason: String },

    #[error("truncated payload at byte offset {offset}: expected {expected} bytes, found {actual}")]
    TruncatedPayload {
        offset: usize,
        expected: usize,
        actual: usize,
    },

    #[error("{extra} trailing bytes after payload at byte offset {offset}")]
    TrailingData { offset: usize, extra: usize },

    #[error("non-finite value in payload at byte offset {offset}")]
    NonFinitePayload { offset: usize },

    #[error("unsupported image format for {path}: {reason}")]
    UnsupportedFormat { path: PathBuf, reason: String },

    #[error("corrupt image {path}: {reason}")]
    CorruptImage { path: PathBuf, reason: String },

    #[error("dataset at {0} contains no usable items")]
    EmptyDataset(PathBuf),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
