//! Min-sum belief propagation for capacitated min-cost flow with exact
//! piecewise-linear convex messages, a message-passing uniqueness test, a
//! randomized (1+ε)-approximation scheme, and the exact oracles used to
//! check all of them.

pub mod bp;
pub mod flowmodel;
pub mod fpras;
pub mod generate;
pub mod int;
pub mod oracles;
pub mod pwl;
pub mod report;
pub mod selftest;

pub use bp::{detect_uniqueness, run, Engine, EngineError, EngineOptions, Rounds, RunOptions, UniquenessOptions};
pub use flowmodel::{
    emit_dimacs, from_json, parse_dimacs, to_json, Arc, ArcId, Capacity, FlowAssignment, FlowNetwork, Node, NodeId,
    ParseError,
};
pub use fpras::{approx_scheme, aprxmt, parse_epsilon, FprasError, FprasOptions};
pub use int::Int;
pub use pwl::{Extended, PwlConvex, PwlError, Sign};
pub use report::{RunError, RunReport};
