use thiserror::Error;

use crate::engine::DeadlockReport;
use crate::topology::{NodeCoord, NodeLabel};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("mesh must be at least 2x2, got {width}x{height}")]
    MeshTooSmall { width: usize, height: usize },

    #[error("coordinate {coord} lies outside the {width}x{height} mesh")]
    OutOfBounds {
        coord: NodeCoord,
        width: usize,
        height: usize,
    },

    #[error("label {label} is out of range for a mesh of {nodes} nodes")]
    LabelOutOfRange { label: NodeLabel, nodes: usize },

    #[error("{from} and {to} are not mesh neighbors")]
    NotAdjacent { from: NodeCoord, to: NodeCoord },

    #[error("source {0} appears in its own destination set")]
    SourceIsDestination(NodeCoord),

    #[error("destination set is empty")]
    EmptyDestinations,

    #[error("destination {0} is listed more than once")]
    DuplicateDestination(NodeCoord),

    #[error("member set is empty")]
    EmptyMembers,

    #[error("representative {0} is not a member of the partition")]
    RepresentativeNotMember(NodeCoord),

    #[error("merged candidate members do not equal the union of its constituents")]
    MemberUnionMismatch,

    #[error("chain is not strictly monotone in label at {0}")]
    NonMonotoneChain(NodeCoord),

    #[error("routing precondition violated: {0}")]
    Routing(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("trace line {line}: {message}")]
    Trace { line: usize, message: String },

    #[error("reports come from different workloads ({baseline} vs {other})")]
    WorkloadMismatch { baseline: String, other: String },

    #[error("deadlock watchdog tripped at cycle {}", .0.cycle)]
    Deadlock(Box<DeadlockReport>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
