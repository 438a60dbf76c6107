use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("vertex {vertex} is out of range or already eliminated")]
    InvalidVertex { vertex: usize },
    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),
    #[error("graph has no vertices")]
    NoVertices,
    #[error("instance has {n} vertices, limit is {limit}")]
    InstanceTooLarge { n: usize, limit: usize },
    #[error("action {action} is not allowed by the current mask")]
    InvalidAction { action: usize },
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
