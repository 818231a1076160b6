use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: line {line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },

    #[error("instance {id}: {message}")]
    Validation { id: String, message: String },

    #[error("split: {0}")]
    Split(String),

    #[error("stats: {0}")]
    Stats(String),

    #[error("tokenize: {0}")]
    Tokenize(String),

    #[error("span projection: {0}")]
    Projection(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("no cached contextual embedding for instance {0}")]
    MissingEmbedding(String),

    #[error("unknown POS tag {0:?}")]
    Tag(String),

    #[error("config: {0}")]
    Config(String),

    #[error("training diverged at epoch {epoch}, batch {batch}: loss = {loss}")]
    Divergence { epoch: usize, batch: usize, loss: f64 },

    #[error("checkpoint incompatible with resources: {0}")]
    Compatibility(String),

    #[error("predictions and gold not aligned: {0}")]
    Alignment(String),

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}
