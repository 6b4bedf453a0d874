use std::path::PathBuf;

use crate::graph::Diagnostic;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("truncated buffer: {0}")]
    Truncated(String),

    #[error("malformed buffer: {0}")]
    Malformed(String),

    #[error("limit exceeded: {0}")]
    Limit(String),

    #[error("unsupported operator `{op}` (node `{node}`)")]
    UnsupportedOp { op: String, node: String },

    #[error("unsupported data type {dtype} for tensor `{tensor}` (only float32 is accepted)")]
    UnsupportedDtype { dtype: i64, tensor: String },

    #[error("unsupported attribute on node `{node}`: {msg}")]
    UnsupportedAttribute { node: String, msg: String },

    #[error("parse error at {path}: {msg}")]
    Parse { path: String, msg: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid graph: {}", join_diagnostics(.0))]
    Invalid(Vec<Diagnostic>),

    #[error("graph contains a cycle through node `{0}`")]
    Cycle(String),

    #[error("shape inference failed at node `{node}`: {msg}")]
    ShapeInference { node: String, msg: String },

    #[error("unknown backend `{0}`")]
    UnknownBackend(String),

    #[error("backend `{backend}` cannot run node `{node}`")]
    IncompatibleBackend { backend: String, node: String },

    #[error("backend registration failed: {0}")]
    Registration(String),

    #[error("input error: {0}")]
    Input(String),

    #[error("non-finite value produced by layer `{layer}`")]
    NonFinite { layer: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("pass `{pass}` produced an invalid graph: {msg}")]
    InternalPass { pass: String, msg: String },

    #[error("{0}")]
    Usage(String),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

fn join_diagnostics(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
