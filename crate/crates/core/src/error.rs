use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the navigation simulator and adaptation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("duplicate viewpoint id `{0}`")]
    DuplicateId(String),
    #[error("viewpoint `{0}` has no landmarks")]
    EmptyLandmarks(String),
    #[error("self-loop edge on `{0}`")]
    SelfLoop(String),
    #[error("edge ({0}, {1}) references unknown viewpoint")]
    DanglingEdge(String, String),
    #[error("edge ({0}, {1}) has zero length")]
    ZeroLengthEdge(String, String),
    #[error("graph is disconnected: `{0}` unreachable from `{1}`")]
    Disconnected(String, String),
    #[error("unknown viewpoint `{0}`")]
    UnknownNode(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("no start/goal pair with {min}..={max} path nodes after {attempts} attempts")]
    GenerationExhausted { min: usize, max: usize, attempts: usize },
    #[error("unsupported file version {found} (expected {expected})")]
    VersionMismatch { found: u64, expected: u64 },
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("memory bank belongs to environment `{found}`, session uses `{expected}`")]
    EnvMismatch { expected: String, found: String },
    #[error("action {action} is not valid in state {state}")]
    InvalidAction { state: String, action: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable snake-case name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Parse(_) => "parse",
            Error::DuplicateId(_) => "duplicate_id",
            Error::EmptyLandmarks(_) => "empty_landmarks",
            Error::SelfLoop(_) => "self_loop",
            Error::DanglingEdge(..) => "dangling_edge",
            Error::ZeroLengthEdge(..) => "zero_length_edge",
            Error::Disconnected(..) => "disconnected",
            Error::UnknownNode(_) => "unknown_node",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::GenerationExhausted { .. } => "generation_exhausted",
            Error::VersionMismatch { .. } => "version_mismatch",
            Error::Schema(_) => "schema",
            Error::EnvMismatch { .. } => "env_mismatch",
            Error::InvalidAction { .. } => "invalid_action",
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
