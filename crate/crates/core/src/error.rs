use thiserror::Error;

use crate::pair_forge::ModificationKind;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("malformed dependency tree: {0}")]
    MalformedTree(String),

    #[error("invalid sentence: {0}")]
    InvalidSentence(String),

    #[error("modification {kind} does not apply to this record: {reason}")]
    ParadigmMismatch {
        kind: ModificationKind,
        reason: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate training data: {0}")]
    DegenerateInput(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("layer {layer} out of range (model has layers 0..={max})")]
    LayerOutOfRange { layer: usize, max: usize },

    #[error("backend `{backend}` does not support {capability}")]
    Unsupported { backend: String, capability: String },

    #[error("backend `{backend}`: {message}")]
    Backend { backend: String, message: String },

    #[error("tokenization failed: {0}")]
    Tokenizer(String),

    #[error("expected exactly one mask position, found {0}")]
    MaskCount(usize),

    #[error("target `{0}` not found in vocabulary")]
    TargetNotInVocabulary(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("plausibility without grammaticality for source ids: {}", .0.join(", "))]
    EntailmentViolation(Vec<String>),

    #[error("invalid diagnostic suite: {0}")]
    InvalidSuite(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub(crate) fn backend(backend: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Backend {
            backend: backend.into(),
            message: message.into(),
        }
    }

    /// True for failures that originate inside a representation backend.
    pub fn is_backend(&self) -> bool {
        matches!(
            self,
            Error::Backend { .. } | Error::Unsupported { .. } | Error::Tokenizer(_)
        )
    }
}
