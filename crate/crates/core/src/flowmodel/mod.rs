//! Flow network model: validation, I/O, preprocessing and residual analysis.

mod bounds;
mod dimacs;
mod json;
mod network;
mod preprocess;
mod residual;
mod split;

use thiserror::Error;

pub use bounds::{iteration_bound, BoundMode};
pub use dimacs::{emit_dimacs, parse_dimacs};
pub use json::{from_json, to_json, to_json_value};
pub use network::{Arc, ArcId, Capacity, FlowAssignment, FlowNetwork, Node, NodeId};
pub use preprocess::{preprocess_degree, Preprocessed};
pub use residual::{min_cycle_cost, residual_graph, CycleCost, Direction, ResidualArc, ResidualGraph};
pub use split::{split_node_capacities, NodeCapacitated, SplitNetwork};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("arc {0} is a self-loop")]
    SelfLoop(ArcId),
    #[error("demands sum to {0}, expected 0")]
    DemandImbalance(i128),
    #[error("cost domain of arc {0} differs from [0, capacity]")]
    BadCostDomain(ArcId),
    #[error("arc {0} has negative capacity")]
    NegativeCapacity(ArcId),
    #[error("duplicate node id {0}")]
    DuplicateNode(NodeId),
    #[error("duplicate arc id {0}")]
    DuplicateArc(ArcId),
    #[error("arc {arc} refers to unknown node {node}")]
    UnknownNode { arc: ArcId, node: NodeId },
}

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: {msg}")]
    SyntaxError { line: usize, msg: String },
    #[error("line {line}: arc has nonzero lower bound {lower}")]
    NonZeroLowerBound { line: usize, lower: i64 },
    #[error("inconsistent instance: {0}")]
    Inconsistent(String),
    #[error("invalid network: {0}")]
    Invalid(#[from] ModelError),
    #[error("invalid JSON instance: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EmitError {
    #[error("arc {0} has a piecewise cost, which DIMACS cannot express")]
    NonLinearCost(ArcId),
    #[error("arc {0} has a cost slope that does not fit in 64 bits")]
    CostTooLarge(ArcId),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FlowError {
    #[error("node {0} is isolated but has nonzero demand")]
    IsolatedDemand(NodeId),
    #[error("forced flow {flow} on arc {arc} violates its bounds")]
    ForcedInfeasible { arc: ArcId, flow: i64 },
    #[error("flow is infeasible: {0}")]
    InfeasibleFlow(String),
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// Triangle v1→v2→v3 plus the direct arc v1→v3, one unit from v1 to v3.
    pub fn triangle() -> FlowNetwork {
        FlowNetwork::new(
            vec![Node { id: NodeId(1), demand: 1 }, Node { id: NodeId(2), demand: 0 }, Node { id: NodeId(3), demand: -1 }],
            vec![
                Arc::linear(1, 1, 2, Capacity::Finite(2), 1),
                Arc::linear(2, 2, 3, Capacity::Finite(2), 1),
                Arc::linear(3, 1, 3, Capacity::Finite(2), 3),
            ],
        )
        .unwrap()
    }
}
