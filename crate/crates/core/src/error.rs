use std::path::PathBuf;

use thiserror::Error;

use crate::graph::{NodeId, Violation};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A text document could not be parsed. `line` is 1-based; 0 means the
    /// problem concerns the document as a whole (e.g. a missing section).
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid graph: {}", join_violations(.0))]
    InvalidGraph(Vec<Violation>),

    #[error("unknown node id {0}")]
    UnknownNode(NodeId),

    #[error("snapshot has no observed value for node {0}")]
    MissingObserved(NodeId),

    #[error("snapshot has no inferred value for edge ({0}, {1})")]
    MissingInferred(NodeId, NodeId),

    #[error("snapshot has an inferred value for ({0}, {1}) which is not an edge of the graph")]
    UnexpectedInferred(NodeId, NodeId),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by the filesystem rather than by the content.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}
