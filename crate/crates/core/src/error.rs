use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid graph `{graph_id}`: {reason}")]
    InvalidGraph { graph_id: String, reason: String },

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("invalid colouring: {0}")]
    InvalidColouring(String),

    #[error("value {value} does not fit in one-hot width {width}")]
    Width { value: usize, width: usize },

    #[error("parse error at {context}: {message}")]
    Parse { context: String, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("{what}: {n} nodes exceeds the limit of {limit}; {hint}")]
    Size {
        what: &'static str,
        n: usize,
        limit: usize,
        hint: &'static str,
    },

    #[error("graph `{0}` carries no node labels")]
    Labeling(String),

    #[error("label `{label}` of graph `{graph_id}` is not in the label universe")]
    Universe { graph_id: String, label: String },

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("generation error: {0}")]
    Generation(String),

    #[error("isomorphic inputs (d = 0) produced different embeddings (gap {gap:e})")]
    IsomorphismViolation { gap: f64 },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn invalid_graph(graph_id: &str, reason: impl Into<String>) -> Self {
        Error::InvalidGraph {
            graph_id: graph_id.to_owned(),
            reason: reason.into(),
        }
    }
}
