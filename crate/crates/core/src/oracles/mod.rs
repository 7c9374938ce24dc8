//! Independent ground truth: exact solving, enumeration, uniqueness checks,
//! computation trees, and a brute-force evaluator for piecewise functions.

mod enumerate;
mod exact;
pub mod grid;
mod tree;

use thiserror::Error;

use crate::flowmodel::{min_cycle_cost, residual_graph, ArcId, CycleCost, FlowAssignment, FlowError, FlowNetwork};

pub use enumerate::{enumerate_integral_flows, DEFAULT_ENUMERATION_BUDGET};
pub use exact::exact_solve;
pub use tree::{build_tree, tree_solve, ComputationTree, RootFlow, TreeArc, TreeSolution, TreeVertex, DEFAULT_TREE_BUDGET};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("instance is infeasible")]
    Infeasible,
    #[error("objective is unbounded below")]
    UnboundedObjective,
    #[error("search space of {size} exceeds budget {budget}")]
    BudgetExceeded { size: u128, budget: u64 },
    #[error("arc {0} has unbounded capacity")]
    UnboundedCapacity(ArcId),
    #[error("arc {0} has a cost slope outside the 128-bit range")]
    Overflow(ArcId),
    #[error("flow is not optimal: its residual graph has a negative cycle")]
    NotOptimal,
    #[error("computation tree exceeds {budget} vertices")]
    SizeBudget { budget: usize },
    #[error("unknown arc {0}")]
    UnknownArc(ArcId),
    #[error(transparent)]
    Flow(#[from] FlowError),
}

/// True when `x` is the only optimal flow: no directed cycle of cost ≤ 0 in
/// its residual graph.
pub fn is_unique_optimum(network: &FlowNetwork, x: &FlowAssignment) -> Result<bool, OracleError> {
    let residual = residual_graph(network, x)?;
    match min_cycle_cost(&residual) {
        CycleCost::NegativeCycle => Err(OracleError::NotOptimal),
        CycleCost::NoCycle => Ok(true),
        CycleCost::Min(d) => Ok(d.signum() > 0),
    }
}
