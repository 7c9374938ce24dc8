//! Round-synchronous min-sum message passing on the flow factor graph.
//!
//! Variables are arcs and factors are the conservation constraints at nodes.
//! Each arc `e = (v, w)` holds two messages: `m_{e→v}`, built from the factor
//! at `w`, and `m_{e→w}`, built from the factor at `v`. Messages are exact
//! piecewise-linear convex functions of the flow on `e`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::flowmodel::{
    iteration_bound, preprocess_degree, ArcId, BoundMode, FlowAssignment, FlowError, FlowNetwork, NodeId,
};
use crate::int::Int;
use crate::pwl::{PwlConvex, PwlError, Sign};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EngineError {
    #[error("message for arc {arc}: {source}")]
    Message { arc: ArcId, source: PwlError },
    #[error("belief of arc {arc}: {source}")]
    Belief { arc: ArcId, source: PwlError },
    #[error("beliefs need at least one round")]
    NoRounds,
    #[error("unknown arc {0}")]
    UnknownArc(ArcId),
    #[error("could not start worker pool: {0}")]
    ThreadPool(String),
    #[error(transparent)]
    Flow(#[from] FlowError),
}

/// The end of an arc a message is sent to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Endpoint {
    Tail,
    Head,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EngineOptions {
    /// Worker threads for the messages of one round; 1 runs inline.
    pub threads: usize,
    /// Shift every message so its first knot value is zero. Argmins and
    /// differences within a belief are unchanged; absolute values are not.
    pub normalize: bool,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions { threads: 1, normalize: false }
    }
}

/// The message table after some number of rounds. Entry `2i` is the message
/// to the tail of the arc at position `i`, entry `2i + 1` the one to its head.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MessageState {
    pub round: u64,
    arcs: Vec<(ArcId, NodeId, NodeId)>,
    messages: Vec<PwlConvex>,
}

impl MessageState {
    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn get(&self, arc: ArcId, to: Endpoint) -> Option<&PwlConvex> {
        let i = self.arcs.iter().position(|a| a.0 == arc)?;
        Some(&self.messages[2 * i + (to == Endpoint::Head) as usize])
    }

    /// `(arc, endpoint, message)` in table order.
    pub fn entries(&self) -> impl Iterator<Item = (ArcId, Endpoint, &PwlConvex)> {
        self.messages.iter().enumerate().map(|(i, m)| {
            let end = if i % 2 == 0 { Endpoint::Tail } else { Endpoint::Head };
            (self.arcs[i / 2].0, end, m)
        })
    }

    pub fn total_pieces(&self) -> usize {
        self.messages.iter().map(PwlConvex::piece_count).sum()
    }

    pub fn max_pieces(&self) -> usize {
        self.messages.iter().map(PwlConvex::piece_count).max().unwrap_or(0)
    }

    /// Largest absolute slope over all messages.
    pub fn max_abs_slope(&self) -> Int {
        self.messages.iter().flat_map(|m| m.slopes()).map(Int::abs).max().unwrap_or(Int::ZERO)
    }

    /// Checks that every slope is bounded by `round · c_max` in absolute value.
    /// Breakpoints and slopes are integers by construction.
    pub fn check_slope_bound(&self, c_max: &Int) -> Result<(), StructureViolation> {
        let bound = &Int::from(self.round) * c_max;
        for (arc, to, m) in self.entries() {
            if let Some(s) = m.slopes().iter().find(|s| s.abs() > bound) {
                return Err(StructureViolation { round: self.round, arc, to, slope: s.clone(), bound });
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        let messages: Vec<serde_json::Value> = self
            .entries()
            .enumerate()
            .map(|(i, (arc, to, m))| {
                let (_, tail, head) = self.arcs[i / 2];
                let node = if to == Endpoint::Tail { tail } else { head };
                serde_json::json!({ "arc": arc, "to": to, "node": node, "message": m })
            })
            .collect();
        serde_json::json!({ "round": self.round, "messages": messages })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("round {round}: message for arc {arc} to {to:?} has slope {slope} beyond {bound}")]
pub struct StructureViolation {
    pub round: u64,
    pub arc: ArcId,
    pub to: Endpoint,
    pub slope: Int,
    pub bound: Int,
}

/// Precomputed inputs of one message update.
struct Plan {
    arc: usize,
    /// Demand of the factor node the message is computed at.
    demand: Int,
    /// `−Δ(factor, e)`.
    outer: Sign,
    /// Messages into the factor from its other arcs, with `Δ(factor, ẽ)`.
    inputs: Vec<(usize, Sign)>,
}

/// Message-passing engine bound to one network.
pub struct Engine<'a> {
    network: &'a FlowNetwork,
    plans: Vec<Plan>,
    options: EngineOptions,
    pool: Option<rayon::ThreadPool>,
}

impl<'a> Engine<'a> {
    pub fn new(network: &'a FlowNetwork, options: EngineOptions) -> Result<Self, EngineError> {
        let incidence = network.incidence_lists();
        let arcs = network.arcs();
        let index_to = |pos: usize, node: NodeId| 2 * pos + (arcs[pos].head == node) as usize;
        let mut plans = Vec::with_capacity(2 * arcs.len());
        for (pos, a) in arcs.iter().enumerate() {
            // to the tail: factor at the head, and vice versa
            for factor in [a.head, a.tail] {
                let fpos = network.node_position(factor).unwrap();
                let inputs = incidence[fpos]
                    .iter()
                    .filter(|&&p| p != pos)
                    .map(|&p| (index_to(p, factor), Sign::from_i8(arcs[p].incidence(factor) as i8)))
                    .collect();
                plans.push(Plan {
                    arc: pos,
                    demand: Int::from(network.demand(factor)),
                    outer: Sign::from_i8(-a.incidence(factor) as i8),
                    inputs,
                });
            }
        }
        let pool = if options.threads > 1 {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(options.threads)
                .build()
                .map_err(|e| EngineError::ThreadPool(e.to_string()))?;
            Some(pool)
        } else {
            None
        };
        Ok(Engine { network, plans, options, pool })
    }

    pub fn network(&self) -> &FlowNetwork {
        self.network
    }

    /// Round 0: every message is the zero function on ℝ.
    pub fn init(&self) -> MessageState {
        MessageState {
            round: 0,
            arcs: self.network.arcs().iter().map(|a| (a.id, a.tail, a.head)).collect(),
            messages: vec![PwlConvex::zero(); self.plans.len()],
        }
    }

    fn compute(&self, plan: &Plan, prev: &[PwlConvex]) -> Result<PwlConvex, EngineError> {
        let arc = &self.network.arcs()[plan.arc];
        let wrap = |source| EngineError::Message { arc: arc.id, source };
        let g = match plan.inputs.as_slice() {
            // x_ẽ = a·t, so I(outer·z + b) = m(a·outer·z + a·b)
            [(i, a)] => {
                let b = if *a == Sign::Plus { plan.demand.clone() } else { -&plan.demand };
                prev[*i].compose_affine(*a * plan.outer, &b)
            }
            [] => PwlConvex::point(Int::ZERO, Int::ZERO).into_composed(plan.outer, &plan.demand),
            inputs => {
                let items: Vec<(&PwlConvex, Sign)> = inputs.iter().map(|(i, a)| (&prev[*i], *a)).collect();
                PwlConvex::scaled_interpolation_of(&items).map_err(wrap)?.into_composed(plan.outer, &plan.demand)
            }
        };
        let m = arc.cost.add(&g).map_err(wrap)?;
        Ok(if self.options.normalize { m.normalized() } else { m })
    }

    /// One synchronous round; every new message reads only the old table.
    pub fn update_round(&self, state: &MessageState) -> Result<MessageState, EngineError> {
        let prev = &state.messages;
        let messages = match &self.pool {
            Some(pool) => pool.install(|| {
                self.plans.par_iter().map(|p| self.compute(p, prev)).collect::<Result<Vec<_>, _>>()
            })?,
            None => self.plans.iter().map(|p| self.compute(p, prev)).collect::<Result<Vec<_>, _>>()?,
        };
        Ok(MessageState { round: state.round + 1, arcs: state.arcs.clone(), messages })
    }

    /// `b_e = m_{e→v} + m_{e→w} − φ_e`.
    pub fn belief(&self, state: &MessageState, arc: ArcId) -> Result<PwlConvex, EngineError> {
        let pos = self.network.arc_position(arc).ok_or(EngineError::UnknownArc(arc))?;
        self.belief_at(state, pos)
    }

    fn belief_at(&self, state: &MessageState, pos: usize) -> Result<PwlConvex, EngineError> {
        if state.round == 0 {
            return Err(EngineError::NoRounds);
        }
        let a = &self.network.arcs()[pos];
        let wrap = |source| EngineError::Belief { arc: a.id, source };
        let sum = state.messages[2 * pos].add(&state.messages[2 * pos + 1]).map_err(wrap)?;
        sum.subtract(&a.cost).map_err(wrap)
    }

    /// Smallest belief minimizer on every arc. Arcs whose belief is flat at
    /// its minimum are listed in `flat_arcs`.
    pub fn estimate(&self, state: &MessageState) -> Result<Estimate, EngineError> {
        let mut flows = BTreeMap::new();
        let mut flat_arcs = Vec::new();
        for (pos, a) in self.network.arcs().iter().enumerate() {
            let b = self.belief_at(state, pos)?;
            let z = b.argmin().map_err(|source| EngineError::Belief { arc: a.id, source })?;
            if b.right_slope(&z).is_some_and(|s| s.is_zero()) {
                flat_arcs.push(a.id);
            }
            flows.insert(a.id, z.to_i64().expect("flow fits i64"));
        }
        Ok(Estimate { assignment: FlowAssignment::evaluate(self.network, flows), flat_arcs })
    }

    /// Gap test at the belief minimizer of every arc: both integral neighbours
    /// must exceed the minimum by more than `threshold`. Values outside the
    /// domain count as +∞.
    pub fn gap_test(&self, state: &MessageState, threshold: &Int) -> Result<Vec<(ArcId, bool)>, EngineError> {
        let mut out = Vec::with_capacity(self.network.arc_count());
        for (pos, a) in self.network.arcs().iter().enumerate() {
            let b = self.belief_at(state, pos)?;
            let wrap = |source| EngineError::Belief { arc: a.id, source };
            let z = b.argmin().map_err(wrap)?;
            let bar = &b.evaluate(&z).expect("argmin in domain") + threshold;
            let pass = [&z - &Int::ONE, &z + &Int::ONE].iter().all(|y| b.evaluate(y).is_none_or(|v| v > bar));
            out.push((a.id, pass));
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Estimate {
    pub assignment: FlowAssignment,
    pub flat_arcs: Vec<ArcId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rounds {
    Fixed(u64),
    /// The convergence bound of the preprocessed network.
    Auto,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunOptions {
    pub rounds: Rounds,
    /// Stop early once the estimate is unchanged for this many rounds. A
    /// heuristic: the exactness guarantee only covers the full round count.
    pub patience: Option<u64>,
    pub engine: EngineOptions,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { rounds: Rounds::Auto, patience: None, engine: EngineOptions::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct PieceStats {
    pub round: u64,
    pub total_pieces: usize,
    pub max_pieces: usize,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    /// Flow on the original network, forced arcs included.
    pub assignment: FlowAssignment,
    /// Final messages of the preprocessed network.
    pub state: MessageState,
    pub rounds_used: u64,
    pub flat_arcs: Vec<ArcId>,
    pub piece_stats: Vec<PieceStats>,
}

/// Preprocesses, runs message passing and merges the forced flows back.
pub fn run(network: &FlowNetwork, options: RunOptions) -> Result<RunOutcome, EngineError> {
    run_observed(network, options, &mut |_| {})
}

/// [`run`] with a callback after every round (for message dumps).
pub fn run_observed(
    network: &FlowNetwork,
    options: RunOptions,
    observer: &mut dyn FnMut(&MessageState),
) -> Result<RunOutcome, EngineError> {
    let pre = preprocess_degree(network)?;
    let reduced = &pre.network;
    let engine = Engine::new(reduced, options.engine)?;
    let rounds = match options.rounds {
        Rounds::Fixed(n) => n,
        Rounds::Auto => iteration_bound(reduced, BoundMode::Convergence),
    };
    let mut state = engine.init();
    let mut piece_stats = Vec::new();
    if reduced.arc_count() == 0 {
        let assignment = FlowAssignment::evaluate(network, merged(&pre.fixed, &BTreeMap::new()));
        return Ok(RunOutcome { assignment, state, rounds_used: 0, flat_arcs: Vec::new(), piece_stats });
    }
    if rounds == 0 {
        return Err(EngineError::NoRounds);
    }
    let mut last: Option<BTreeMap<ArcId, i64>> = None;
    let mut stable = 0u64;
    while state.round < rounds {
        state = engine.update_round(&state)?;
        piece_stats.push(PieceStats { round: state.round, total_pieces: state.total_pieces(), max_pieces: state.max_pieces() });
        observer(&state);
        if let Some(patience) = options.patience {
            let flows = engine.estimate(&state)?.assignment.flows;
            stable = if last.as_ref() == Some(&flows) { stable + 1 } else { 0 };
            last = Some(flows);
            if stable >= patience {
                break;
            }
        }
    }
    let est = engine.estimate(&state)?;
    let assignment = FlowAssignment::evaluate(network, merged(&pre.fixed, &est.assignment.flows));
    Ok(RunOutcome { assignment, rounds_used: state.round, state, flat_arcs: est.flat_arcs, piece_stats })
}

fn merged(fixed: &BTreeMap<ArcId, i64>, rest: &BTreeMap<ArcId, i64>) -> BTreeMap<ArcId, i64> {
    fixed.iter().chain(rest).map(|(k, v)| (*k, *v)).collect()
}

#[derive(Clone, Debug)]
pub struct UniquenessReport {
    pub unique: bool,
    /// The optimum on the original network when `unique`.
    pub assignment: Option<FlowAssignment>,
    /// The estimate after the final round, unique or not.
    pub estimate: FlowAssignment,
    pub rounds: u64,
    pub failing_arcs: Vec<ArcId>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct UniquenessOptions {
    /// Defaults to `n²·c_max + n` of the preprocessed network.
    pub rounds: Option<u64>,
    pub threads: usize,
}

/// Decides whether the optimum is unique by running the uniqueness bound of
/// rounds and applying the gap test with threshold `n·c_max`. Runs with
/// normalized messages.
pub fn detect_uniqueness(network: &FlowNetwork, options: UniquenessOptions) -> Result<UniquenessReport, EngineError> {
    let pre = preprocess_degree(network)?;
    let reduced = &pre.network;
    let threshold = &Int::from(reduced.node_count()) * reduced.c_max();
    let rounds = options.rounds.unwrap_or_else(|| iteration_bound(reduced, BoundMode::Uniqueness));
    let engine = Engine::new(reduced, EngineOptions { threads: options.threads.max(1), normalize: true })?;
    if reduced.arc_count() == 0 {
        let x = FlowAssignment::evaluate(network, pre.fixed.clone());
        return Ok(UniquenessReport { unique: true, assignment: Some(x.clone()), estimate: x, rounds: 0, failing_arcs: Vec::new() });
    }
    if rounds == 0 {
        return Err(EngineError::NoRounds);
    }
    let mut state = engine.init();
    while state.round < rounds {
        state = engine.update_round(&state)?;
    }
    let failing_arcs: Vec<ArcId> =
        engine.gap_test(&state, &threshold)?.into_iter().filter(|(_, ok)| !ok).map(|(a, _)| a).collect();
    let est = engine.estimate(&state)?;
    let estimate = FlowAssignment::evaluate(network, merged(&pre.fixed, &est.assignment.flows));
    let unique = failing_arcs.is_empty();
    Ok(UniquenessReport { unique, assignment: unique.then(|| estimate.clone()), estimate, rounds, failing_arcs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flowmodel::fixtures::triangle;
    use crate::pwl::Extended;

    fn linear(slope: i64, hi: i64) -> PwlConvex {
        PwlConvex::linear(Int::from(slope), Extended::from(0), Extended::from(hi)).unwrap()
    }

    #[test]
    fn init_is_zero() {
        let net = triangle();
        let engine = Engine::new(&net, EngineOptions::default()).unwrap();
        let s = engine.init();
        assert_eq!(s.len(), 6);
        assert!(s.entries().all(|(_, _, m)| *m == PwlConvex::zero()));
    }

    #[test]
    fn first_rounds_of_t1() {
        let net = triangle();
        let engine = Engine::new(&net, EngineOptions::default()).unwrap();
        let s1 = engine.update_round(&engine.init()).unwrap();
        assert_eq!(s1.get(ArcId(1), Endpoint::Tail).unwrap(), &linear(1, 2));
        assert_eq!(engine.belief(&s1, ArcId(1)).unwrap(), linear(1, 2));
        let s2 = engine.update_round(&s1).unwrap();
        assert_eq!(s2.get(ArcId(1), Endpoint::Tail).unwrap(), &linear(2, 2));
        s2.check_slope_bound(net.c_max()).unwrap();
    }

    #[test]
    fn auto_run_on_t1() {
        let out = run(&triangle(), RunOptions::default()).unwrap();
        assert_eq!(out.rounds_used, 12);
        assert_eq!(out.assignment.as_vec(&triangle()), vec![1, 1, 0]);
        assert_eq!(out.assignment.objective, Int::from(2));
        assert!(out.assignment.feasible);
        assert!(out.flat_arcs.is_empty());
    }

    #[test]
    fn threads_do_not_change_messages() {
        let net = triangle();
        let one = run(&net, RunOptions { rounds: Rounds::Fixed(9), ..Default::default() }).unwrap();
        let opts = RunOptions { rounds: Rounds::Fixed(9), engine: EngineOptions { threads: 3, normalize: false }, patience: None };
        let three = run(&net, opts).unwrap();
        assert_eq!(one.state, three.state);
    }

    #[test]
    fn uniqueness_on_t1_variants() {
        let r = detect_uniqueness(&triangle(), UniquenessOptions::default()).unwrap();
        assert_eq!(r.rounds, 30);
        assert!(r.unique);
        assert_eq!(r.assignment.unwrap().as_vec(&triangle()), vec![1, 1, 0]);

        let tied = triangle().with_linear_costs(&[(ArcId(3), Int::from(2))].into()).unwrap();
        assert!(!detect_uniqueness(&tied, UniquenessOptions::default()).unwrap().unique);
    }

    #[test]
    fn parallel_arcs_have_distinct_entries() {
        use crate::flowmodel::{Arc, Capacity, Node};
        let net = FlowNetwork::new(
            vec![Node { id: NodeId(1), demand: 1 }, Node { id: NodeId(2), demand: -1 }],
            vec![Arc::linear(1, 1, 2, Capacity::Finite(1), 1), Arc::linear(2, 1, 2, Capacity::Finite(1), 2)],
        )
        .unwrap();
        let engine = Engine::new(&net, EngineOptions::default()).unwrap();
        assert_eq!(engine.init().len(), 4);
        let out = run(&net, RunOptions::default()).unwrap();
        assert_eq!(out.assignment.as_vec(&net), vec![1, 0]);
    }

    #[test]
    fn empty_after_preprocessing() {
        use crate::flowmodel::{Arc, Capacity, Node};
        let net = FlowNetwork::new(
            vec![Node { id: NodeId(1), demand: 1 }, Node { id: NodeId(2), demand: -1 }],
            vec![Arc::linear(1, 1, 2, Capacity::Finite(2), 1)],
        )
        .unwrap();
        let out = run(&net, RunOptions::default()).unwrap();
        assert_eq!(out.rounds_used, 0);
        assert!(out.state.is_empty());
        assert_eq!(out.assignment.as_vec(&net), vec![1]);
        let r = detect_uniqueness(&net, UniquenessOptions::default()).unwrap();
        assert!(r.unique);
    }
}
