//! Crate-wide error type.

use std::io;

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// The model requires a connected graph.
    #[error("graph is not connected")]
    Disconnected,

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    /// The algorithm expected a path graph (every node of degree at most 2).
    #[error("graph is not a path")]
    NotPathGraph,

    /// The algorithm expected an acyclic connected graph.
    #[error("graph is not a tree")]
    NotTree,

    #[error("invalid path: {0}")]
    InvalidPath(String),

    /// Only edges of the graph can be observed; this is the central model
    /// constraint.
    #[error("illegal observation: nodes {i} and {j} are not joined by an edge")]
    IllegalObservation { i: usize, j: usize },

    #[error("validation failed: {0}")]
    Validation(String),

    /// Accuracy max(epsilon, gap_hint) is zero; the required sample size
    /// would be unbounded.
    #[error("effective accuracy is zero; the required sample size is unbounded")]
    ZeroAccuracy,

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}
