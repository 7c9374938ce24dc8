//! Seeded random instances and the oscillating triangle family.

use std::ops::RangeInclusive;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::flowmodel::{Arc, ArcId, Capacity, FlowNetwork, Node, NodeId};
use crate::int::Int;
use crate::oracles::{exact_solve, is_unique_optimum, OracleError};
use crate::pwl::{Extended, PwlConvex};

pub const DEFAULT_GENERATION_BUDGET: u32 = 10_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GenError {
    #[error("{arcs} arcs cannot connect {nodes} nodes")]
    TooFewArcs { nodes: usize, arcs: usize },
    #[error("invalid parameter: {0}")]
    BadParameter(String),
    #[error("no instance with the requested optimum structure after {attempts} attempts")]
    GenerationBudget { attempts: u32 },
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// Which optimum structure to accept.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Optimum {
    #[default]
    Any,
    Unique,
    /// At least two optimal flows.
    Multiple,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GenParams {
    pub nodes: usize,
    pub arcs: usize,
    /// Costs (or cost slopes) are drawn from `0..=c_max`.
    pub c_max: i64,
    /// Capacities are drawn from `1..=cap_max`.
    pub cap_max: i64,
    pub seed: u64,
    pub optimum: Optimum,
    /// Piece counts for convex piecewise costs; `None` gives linear costs.
    pub pieces: Option<RangeInclusive<usize>>,
    pub budget: u32,
}

impl GenParams {
    pub fn new(nodes: usize, arcs: usize, c_max: i64, cap_max: i64, seed: u64) -> Self {
        GenParams { nodes, arcs, c_max, cap_max, seed, optimum: Optimum::Any, pieces: None, budget: DEFAULT_GENERATION_BUDGET }
    }

    fn check(&self) -> Result<(), GenError> {
        if self.nodes == 0 {
            return Err(GenError::BadParameter("at least one node is required".into()));
        }
        if self.arcs + 1 < self.nodes {
            return Err(GenError::TooFewArcs { nodes: self.nodes, arcs: self.arcs });
        }
        if self.nodes == 1 && self.arcs > 0 {
            return Err(GenError::BadParameter("a single node admits no arcs".into()));
        }
        if self.c_max < 0 || self.cap_max < 1 {
            return Err(GenError::BadParameter("need c_max >= 0 and cap_max >= 1".into()));
        }
        if let Some(p) = &self.pieces {
            if *p.start() == 0 || p.start() > p.end() {
                return Err(GenError::BadParameter("piece range must be non-empty and start at 1 or more".into()));
            }
            // strictly increasing slopes from 0..=c_max
            if *p.start() as i64 > self.c_max + 1 {
                return Err(GenError::BadParameter("c_max too small for the requested piece count".into()));
            }
        }
        Ok(())
    }
}

/// A connected random digraph whose demands come from a random feasible
/// flow, rejection-sampled until the optimum structure matches.
pub fn generate(params: &GenParams) -> Result<FlowNetwork, GenError> {
    params.check()?;
    let mut rng = ChaCha20Rng::seed_from_u64(params.seed);
    for _ in 0..params.budget {
        let net = draw(params, &mut rng);
        let accept = match params.optimum {
            Optimum::Any => true,
            wanted => {
                let x = exact_solve(&net)?;
                is_unique_optimum(&net, &x)? == (wanted == Optimum::Unique)
            }
        };
        if accept {
            return Ok(net);
        }
    }
    Err(GenError::GenerationBudget { attempts: params.budget })
}

fn draw(params: &GenParams, rng: &mut ChaCha20Rng) -> FlowNetwork {
    let n = params.nodes;
    let mut ends = Vec::with_capacity(params.arcs);
    // random spanning tree over a shuffled order, then extra arcs
    let order: Vec<usize> = sample(rng, n, n).into_vec();
    for i in 1..n {
        let a = order[i];
        let b = order[rng.gen_range(0..i)];
        ends.push(if rng.gen_bool(0.5) { (a, b) } else { (b, a) });
    }
    while ends.len() < params.arcs {
        let a = rng.gen_range(0..n);
        let mut b = rng.gen_range(0..n - 1);
        if b >= a {
            b += 1;
        }
        ends.push((a, b));
    }
    let mut demand = vec![0i64; n];
    let mut arcs = Vec::with_capacity(ends.len());
    for (i, (t, h)) in ends.into_iter().enumerate() {
        let cap = rng.gen_range(1..=params.cap_max);
        let flow = rng.gen_range(0..=cap);
        demand[t] += flow;
        demand[h] -= flow;
        let cost = match &params.pieces {
            None => PwlConvex::linear(Int::from(rng.gen_range(0..=params.c_max)), Extended::from(0), Extended::from(cap))
                .expect("finite segment"),
            Some(range) => convex_cost(rng, cap, params.c_max, range),
        };
        arcs.push(Arc { id: ArcId(i as u32 + 1), tail: NodeId(t as u32 + 1), head: NodeId(h as u32 + 1), capacity: Capacity::Finite(cap), cost });
    }
    let nodes = demand.iter().enumerate().map(|(i, d)| Node { id: NodeId(i as u32 + 1), demand: *d }).collect();
    FlowNetwork::new(nodes, arcs).expect("generated network is valid")
}

/// Convex cost on `[0, cap]` with strictly increasing slopes from `0..=c_max`.
fn convex_cost(rng: &mut ChaCha20Rng, cap: i64, c_max: i64, range: &RangeInclusive<usize>) -> PwlConvex {
    let want = rng.gen_range(range.clone());
    let k = want.min(cap as usize).min(c_max as usize + 1).max(1);
    let mut cuts: Vec<i64> = sample(rng, cap as usize - 1, k - 1).into_iter().map(|c| c as i64 + 1).collect();
    cuts.sort_unstable();
    let mut slopes: Vec<i64> = sample(rng, c_max as usize + 1, k).into_iter().map(|s| s as i64).collect();
    slopes.sort_unstable();
    let breakpoints = std::iter::once(0).chain(cuts).chain(std::iter::once(cap)).map(Extended::from).collect();
    PwlConvex::new(breakpoints, slopes.into_iter().map(Int::from).collect(), (Int::ZERO, Int::ZERO)).expect("convex by construction")
}

/// Triangle with one unit from `v1` to `v3`: the path `v1→v2→v3` costs `2D`
/// and the direct arc `v1→v3` costs `2D − 1`, all capacities 1. Message
/// passing keeps picking the path every third round for about `1.5·D`
/// rounds before settling on the direct arc.
pub fn oscillating_triangle(d: i64) -> FlowNetwork {
    FlowNetwork::new(
        vec![Node { id: NodeId(1), demand: 1 }, Node { id: NodeId(2), demand: 0 }, Node { id: NodeId(3), demand: -1 }],
        vec![
            Arc::linear(1, 1, 2, Capacity::Finite(1), d),
            Arc::linear(2, 2, 3, Capacity::Finite(1), d),
            Arc::linear(3, 1, 3, Capacity::Finite(1), 2 * d - 1),
        ],
    )
    .expect("triangle is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::exact_solve;

    #[test]
    fn generated_instances_are_feasible_and_connected() {
        for seed in 0..30 {
            let net = generate(&GenParams::new(5, 7, 8, 4, seed)).unwrap();
            assert_eq!(net.node_count(), 5);
            assert_eq!(net.arc_count(), 7);
            assert!(net.c_max() <= &Int::from(8));
            assert!(exact_solve(&net).unwrap().feasible);
        }
    }

    #[test]
    fn seeds_are_reproducible() {
        let p = GenParams::new(4, 6, 5, 3, 9);
        assert_eq!(generate(&p).unwrap(), generate(&p).unwrap());
        assert_ne!(generate(&p).unwrap(), generate(&GenParams { seed: 10, ..p }).unwrap());
    }

    #[test]
    fn optimum_structure_is_enforced() {
        for seed in 0..10 {
            let unique = generate(&GenParams { optimum: Optimum::Unique, ..GenParams::new(4, 6, 8, 3, seed) }).unwrap();
            assert!(is_unique_optimum(&unique, &exact_solve(&unique).unwrap()).unwrap());
            let multi = generate(&GenParams { optimum: Optimum::Multiple, ..GenParams::new(4, 6, 2, 3, seed) }).unwrap();
            assert!(!is_unique_optimum(&multi, &exact_solve(&multi).unwrap()).unwrap());
        }
    }

    #[test]
    fn piecewise_costs() {
        let p = GenParams { pieces: Some(2..=3), ..GenParams::new(4, 6, 8, 4, 3) };
        let net = generate(&p).unwrap();
        assert!(net.arcs().iter().any(|a| a.cost.piece_count() >= 2));
        assert!(net.arcs().iter().all(|a| a.cost.piece_count() <= 3));
    }

    #[test]
    fn parameter_errors() {
        assert_eq!(generate(&GenParams::new(3, 1, 1, 1, 0)).unwrap_err(), GenError::TooFewArcs { nodes: 3, arcs: 1 });
        assert!(matches!(generate(&GenParams::new(3, 3, 1, 0, 0)), Err(GenError::BadParameter(_))));
    }

    #[test]
    fn triangle_optimum_is_the_direct_arc() {
        let net = oscillating_triangle(5);
        assert_eq!(exact_solve(&net).unwrap().as_vec(&net), vec![0, 0, 1]);
    }
}
