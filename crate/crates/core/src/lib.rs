//! Monte Carlo estimation of encoded-gate error rates for fusion-based
//! linear-optics computation protected by the four-qubit error-detecting
//! code, with threshold and resource analysis on top.

pub mod checks;
pub mod cluster;
pub mod code;
pub mod extrapolate;
pub mod gates;
pub mod montecarlo;
pub mod noise;
pub mod oracle;
pub mod pauli;
pub mod resources;
pub mod rng;
pub mod threshold;
pub mod verify;

pub type NodeId = u32;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum Error {
    #[error("node {0} is not in the cluster")]
    UnknownNode(NodeId),
    #[error("node {0} was already measured")]
    AlreadyMeasured(NodeId),
    #[error("self loop on node {0}")]
    SelfLoop(NodeId),
    #[error("nodes {0} and {1} are not adjacent")]
    NotAdjacent(NodeId, NodeId),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("missing rate table entry: {0}")]
    MissingEntry(String),
    #[error("state vector limited to {max} qubits, requested {requested}")]
    TooManyQubits { max: usize, requested: usize },
    #[error("divergent: {0}")]
    Divergent(String),
}
