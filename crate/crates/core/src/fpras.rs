//! Randomized (1+ε)-approximation: cost perturbation that isolates a unique
//! optimum, message passing with a uniqueness check and restarts, and
//! decimation that fixes one arc per round.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;
use thiserror::Error;

use crate::bp::{detect_uniqueness, EngineError, UniquenessOptions};
use crate::flowmodel::{
    preprocess_degree, Arc, ArcId, FlowAssignment, FlowError, FlowNetwork, ModelError, Node, Preprocessed,
};
use crate::int::Int;
use crate::oracles::{exact_solve, OracleError};

pub const DEFAULT_RESTART_BUDGET: u32 = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FprasError {
    #[error("all arc costs are zero")]
    ZeroCostInstance,
    #[error("epsilon must be a rational strictly between 0 and 1, got {0}")]
    BadEpsilon(String),
    #[error("arc {0} has a piecewise cost; perturbation needs linear costs")]
    NonLinearCost(ArcId),
    #[error("no unique perturbed optimum after {budget} attempts")]
    RestartBudgetExceeded { budget: u32 },
    #[error("value {value} is outside [0, capacity] of arc {arc}")]
    ValueOutOfRange { arc: ArcId, value: i64 },
    #[error("unknown arc {0}")]
    UnknownArc(ArcId),
    #[error("fixing arc {arc} left an infeasible instance: {source}")]
    InfeasibleAfterFix { arc: ArcId, source: FlowError },
    #[error("assembled flow is infeasible")]
    InfeasibleResult,
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Parses `p/q`, a decimal such as `0.25`, or an integer, and checks `0 < ε < 1`.
pub fn parse_epsilon(text: &str) -> Result<BigRational, FprasError> {
    let bad = || FprasError::BadEpsilon(text.to_string());
    let t = text.trim();
    let value = if let Some((p, q)) = t.split_once('/') {
        let p: BigInt = p.trim().parse().map_err(|_| bad())?;
        let q: BigInt = q.trim().parse().map_err(|_| bad())?;
        if q.is_zero() {
            return Err(bad());
        }
        BigRational::new(p, q)
    } else if let Some((whole, frac)) = t.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) || whole.starts_with('-') {
            return Err(bad());
        }
        let digits: BigInt = format!("{whole}{frac}").parse().map_err(|_| bad())?;
        BigRational::new(digits, num_traits::pow(BigInt::from(10), frac.len()))
    } else {
        BigRational::from_integer(t.parse().map_err(|_| bad())?)
    };
    check_epsilon(&value).map_err(|_| bad())?;
    Ok(value)
}

fn check_epsilon(eps: &BigRational) -> Result<(), FprasError> {
    if eps.is_positive() && *eps < BigRational::one() {
        Ok(())
    } else {
        Err(FprasError::BadEpsilon(eps.to_string()))
    }
}

/// A network with costs `c̄_e = 4m·⌊c_e/t⌋ + p_e`, `t = c_max·ε/(4mn)` and
/// `p_e` uniform on `{1, …, 4m}`.
#[derive(Clone, Debug)]
pub struct PerturbedInstance {
    pub original: FlowNetwork,
    /// Same topology and demands with the perturbed costs.
    pub network: FlowNetwork,
    pub granularity: BigRational,
    pub costs: BTreeMap<ArcId, Int>,
    pub noise: BTreeMap<ArcId, u64>,
    pub seed: u64,
    pub stream: u64,
}

impl PerturbedInstance {
    pub fn c_bar_max(&self) -> &Int {
        self.network.c_max()
    }
}

/// Perturbs with sub-stream 0 of `seed`.
pub fn perturb_costs(network: &FlowNetwork, eps: &BigRational, seed: u64) -> Result<PerturbedInstance, FprasError> {
    perturb_costs_stream(network, eps, seed, 0)
}

/// Perturbs with the given ChaCha sub-stream, so every attempt of every
/// decimation round draws independent noise from one seed.
pub fn perturb_costs_stream(
    network: &FlowNetwork,
    eps: &BigRational,
    seed: u64,
    stream: u64,
) -> Result<PerturbedInstance, FprasError> {
    check_epsilon(eps)?;
    let mut costs_in = Vec::with_capacity(network.arc_count());
    for a in network.arcs() {
        costs_in.push(a.linear_cost().ok_or(FprasError::NonLinearCost(a.id))?.to_bigint());
    }
    let c_max = network.c_max().to_bigint();
    if c_max.is_zero() {
        return Err(FprasError::ZeroCostInstance);
    }
    let m = BigInt::from(network.arc_count());
    let n = BigInt::from(network.node_count());
    let four_m = &m * 4u32;
    let granularity = BigRational::new(&c_max * eps.numer(), &four_m * &n * eps.denom());
    // c/t = 4mn·c·q / (c_max·p) for ε = p/q
    let num_scale = &four_m * &n * eps.denom();
    let den = &c_max * eps.numer();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let range = 4 * network.arc_count() as u64;
    let mut costs = BTreeMap::new();
    let mut noise = BTreeMap::new();
    for (a, c) in network.arcs().iter().zip(costs_in) {
        let p: u64 = rng.gen_range(1..=range);
        let scaled = (c * &num_scale).div_floor(&den);
        costs.insert(a.id, Int::from(&four_m * scaled + BigInt::from(p)));
        noise.insert(a.id, p);
    }
    let perturbed = network.with_linear_costs(&costs)?;
    Ok(PerturbedInstance { original: network.clone(), network: perturbed, granularity, costs, noise, seed, stream })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FprasOptions {
    pub restart_budget: u32,
    pub threads: usize,
}

impl Default for FprasOptions {
    fn default() -> Self {
        FprasOptions { restart_budget: DEFAULT_RESTART_BUDGET, threads: 1 }
    }
}

#[derive(Clone, Debug)]
pub struct AprxmtOutcome {
    /// The unique perturbed optimum, evaluated under the original costs.
    pub assignment: FlowAssignment,
    /// The successful draw; `None` when the instance needed no message passing.
    pub perturbed: Option<PerturbedInstance>,
    pub restarts: u32,
    pub rounds: u64,
}

/// Draws perturbations until message passing certifies a unique perturbed
/// optimum, running `2·c̄_max·n²` rounds per attempt.
pub fn aprxmt(
    network: &FlowNetwork,
    eps: &BigRational,
    seed: u64,
    options: FprasOptions,
) -> Result<AprxmtOutcome, FprasError> {
    aprxmt_round(network, eps, seed, 0, options)
}

fn aprxmt_round(
    network: &FlowNetwork,
    eps: &BigRational,
    seed: u64,
    round: u32,
    options: FprasOptions,
) -> Result<AprxmtOutcome, FprasError> {
    check_epsilon(eps)?;
    let pre = preprocess_degree(network)?;
    let reduced = &pre.network;
    if reduced.arc_count() == 0 {
        let assignment = FlowAssignment::evaluate(network, pre.fixed);
        return Ok(AprxmtOutcome { assignment, perturbed: None, restarts: 0, rounds: 0 });
    }
    if reduced.c_max().is_zero() {
        // every feasible flow is optimal
        let x = exact_solve(reduced)?;
        let assignment = FlowAssignment::evaluate(network, merged(&pre.fixed, &x.flows));
        return Ok(AprxmtOutcome { assignment, perturbed: None, restarts: 0, rounds: 0 });
    }
    for attempt in 0..options.restart_budget {
        let stream = (u64::from(round) << 32) | u64::from(attempt);
        let perturbed = perturb_costs_stream(reduced, eps, seed, stream)?;
        let rounds = perturbed_round_count(&perturbed.network);
        let report = detect_uniqueness(
            &perturbed.network,
            UniquenessOptions { rounds: Some(rounds), threads: options.threads },
        )?;
        if let Some(x) = report.assignment {
            let assignment = FlowAssignment::evaluate(network, merged(&pre.fixed, &x.flows));
            return Ok(AprxmtOutcome { assignment, perturbed: Some(perturbed), restarts: attempt, rounds });
        }
    }
    Err(FprasError::RestartBudgetExceeded { budget: options.restart_budget })
}

/// `2·c̄_max·n²`, saturating.
fn perturbed_round_count(network: &FlowNetwork) -> u64 {
    let n = Int::from(network.node_count());
    let r = &(&Int::from(2) * network.c_max()) * &(&n * &n);
    r.to_i64().map_or(u64::MAX, |v| v as u64)
}

fn merged(fixed: &BTreeMap<ArcId, i64>, rest: &BTreeMap<ArcId, i64>) -> BTreeMap<ArcId, i64> {
    fixed.iter().chain(rest).map(|(k, v)| (*k, *v)).collect()
}

/// Removes `arc` carrying `value`, moves that flow into the endpoint
/// demands, and re-runs degree preprocessing.
pub fn fix_arc(network: &FlowNetwork, arc: ArcId, value: i64) -> Result<Preprocessed, FprasError> {
    let a = network.arc(arc).ok_or(FprasError::UnknownArc(arc))?;
    if !a.capacity.admits(value) {
        return Err(FprasError::ValueOutOfRange { arc, value });
    }
    let nodes = network
        .nodes()
        .iter()
        .map(|v| {
            let demand = if v.id == a.tail {
                v.demand - value
            } else if v.id == a.head {
                v.demand + value
            } else {
                v.demand
            };
            Node { id: v.id, demand }
        })
        .collect();
    let arcs: Vec<Arc> = network.arcs().iter().filter(|b| b.id != arc).cloned().collect();
    let reduced = FlowNetwork::new(nodes, arcs)?;
    preprocess_degree(&reduced).map_err(|source| FprasError::InfeasibleAfterFix { arc, source })
}

/// One decimation round as reported in run logs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DecimationRound {
    pub fixed_arc: ArcId,
    pub value: i64,
    pub restarts: u32,
    pub c_bar_max: Int,
    pub rounds: u64,
    /// The granularity `t` as `p/q`.
    pub granularity: String,
}

/// What an observer sees before the chosen arc is fixed.
pub struct DecimationView<'a> {
    /// The current instance, already reduced by preprocessing.
    pub instance: &'a FlowNetwork,
    /// The unique perturbed optimum on `instance`.
    pub x2: &'a FlowAssignment,
    pub granularity: &'a BigRational,
    pub log: &'a DecimationRound,
}

#[derive(Clone, Debug)]
pub struct ApproxOutcome {
    pub assignment: FlowAssignment,
    pub rounds: Vec<DecimationRound>,
}

/// Decimation: repeatedly solve the perturbed instance, fix the most
/// expensive arc at its flow there, and shrink the instance.
pub fn approx_scheme(
    network: &FlowNetwork,
    eps: &BigRational,
    seed: u64,
    options: FprasOptions,
) -> Result<ApproxOutcome, FprasError> {
    approx_scheme_observed(network, eps, seed, options, &mut |_| {})
}

pub fn approx_scheme_observed(
    network: &FlowNetwork,
    eps: &BigRational,
    seed: u64,
    options: FprasOptions,
    observer: &mut dyn FnMut(&DecimationView),
) -> Result<ApproxOutcome, FprasError> {
    check_epsilon(eps)?;
    if let Some(a) = network.arcs().iter().find(|a| a.linear_cost().is_none()) {
        return Err(FprasError::NonLinearCost(a.id));
    }
    let pre = preprocess_degree(network)?;
    let mut fixed = pre.fixed;
    let mut current = pre.network;
    let mut log = Vec::new();
    let mut round = 0u32;
    while current.arc_count() > 0 {
        if current.c_max().is_zero() {
            let x = exact_solve(&current)?;
            fixed.extend(x.flows);
            break;
        }
        let out = aprxmt_round(&current, eps, seed, round, options)?;
        let perturbed = out.perturbed.as_ref().expect("reduced instance with costs is perturbed");
        let target = current
            .arcs()
            .iter()
            .map(|a| (a.linear_cost().expect("linear"), a.id))
            .max_by(|(c1, id1), (c2, id2)| c1.cmp(c2).then(id2.cmp(id1)))
            .map(|(_, id)| id)
            .expect("non-empty");
        let value = out.assignment.flow(target);
        let entry = DecimationRound {
            fixed_arc: target,
            value,
            restarts: out.restarts,
            c_bar_max: perturbed.c_bar_max().clone(),
            rounds: out.rounds,
            granularity: perturbed.granularity.to_string(),
        };
        observer(&DecimationView { instance: &current, x2: &out.assignment, granularity: &perturbed.granularity, log: &entry });
        let next = fix_arc(&current, target, value)?;
        fixed.insert(target, value);
        fixed.extend(next.fixed);
        current = next.network;
        log.push(entry);
        round += 1;
    }
    let assignment = FlowAssignment::evaluate(network, fixed);
    if !assignment.feasible {
        return Err(FprasError::InfeasibleResult);
    }
    Ok(ApproxOutcome { assignment, rounds: log })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flowmodel::fixtures::triangle;
    use crate::oracles::is_unique_optimum;

    fn half() -> BigRational {
        BigRational::new(1.into(), 2.into())
    }

    #[test]
    fn epsilon_parsing() {
        assert_eq!(parse_epsilon("1/2").unwrap(), half());
        assert_eq!(parse_epsilon("0.5").unwrap(), half());
        assert_eq!(parse_epsilon(" .25").unwrap(), BigRational::new(1.into(), 4.into()));
        for bad in ["0", "1", "1.0", "-0.5", "3/2", "x", "1/0", "0.", ""] {
            assert!(parse_epsilon(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn perturbation_of_t1() {
        let p = perturb_costs(&triangle(), &half(), 7).unwrap();
        assert_eq!(p.granularity, BigRational::new(1.into(), 24.into()));
        for (id, base) in [(1, 288), (2, 288), (3, 864)] {
            let c = p.costs[&ArcId(id)].to_i64().unwrap();
            let noise = p.noise[&ArcId(id)] as i64;
            assert!((1..=12).contains(&noise));
            assert_eq!(c, base + noise);
        }
        let again = perturb_costs(&triangle(), &half(), 7).unwrap();
        assert_eq!(p.costs, again.costs);
        let other = perturb_costs_stream(&triangle(), &half(), 7, 1).unwrap();
        assert_ne!(p.costs, other.costs);
    }

    #[test]
    fn zero_costs_are_rejected() {
        let zero = triangle().with_linear_costs(&(1..=3).map(|i| (ArcId(i), Int::ZERO)).collect()).unwrap();
        assert_eq!(perturb_costs(&zero, &half(), 1).unwrap_err(), FprasError::ZeroCostInstance);
        let out = approx_scheme(&zero, &half(), 1, FprasOptions::default()).unwrap();
        assert!(out.assignment.feasible);
        assert_eq!(out.assignment.objective, Int::ZERO);
    }

    #[test]
    fn aprxmt_on_t1() {
        let out = aprxmt(&triangle(), &half(), 3, FprasOptions::default()).unwrap();
        assert_eq!(out.assignment.as_vec(&triangle()), vec![1, 1, 0]);
        let p = out.perturbed.unwrap();
        let n = 3u64;
        assert_eq!(out.rounds, 2 * p.c_bar_max().to_i64().unwrap() as u64 * n * n);
    }

    #[test]
    fn aprxmt_isolates_one_of_two_optima() {
        let tied = triangle().with_linear_costs(&[(ArcId(3), Int::from(2))].into()).unwrap();
        let out = aprxmt(&tied, &half(), 11, FprasOptions::default()).unwrap();
        assert!(out.assignment.feasible);
        assert_eq!(out.assignment.objective, Int::from(2));
    }

    #[test]
    fn restarts_follow_non_unique_draws() {
        let tied = triangle().with_linear_costs(&[(ArcId(3), Int::from(2))].into()).unwrap();
        // the perturbed tie survives only when p_e1 + p_e2 = p_e3
        let seed = (0..500u64)
            .find(|&s| {
                let p = perturb_costs_stream(&tied, &half(), s, 0).unwrap();
                let x = exact_solve(&p.network).unwrap();
                !is_unique_optimum(&p.network, &x).unwrap()
            })
            .expect("some seed draws a tie");
        let out = aprxmt(&tied, &half(), seed, FprasOptions::default()).unwrap();
        assert!(out.restarts >= 1);
        let out = aprxmt(&tied, &half(), seed, FprasOptions { restart_budget: 1, threads: 1 });
        assert_eq!(out.unwrap_err(), FprasError::RestartBudgetExceeded { budget: 1 });
    }

    #[test]
    fn fixing_arcs() {
        let fixed = fix_arc(&triangle(), ArcId(3), 1).unwrap();
        assert_eq!(fixed.network.arc_count(), 0);
        assert_eq!(fixed.fixed, [(ArcId(1), 0), (ArcId(2), 0)].into());
        let kept = fix_arc(&triangle(), ArcId(3), 0).unwrap();
        assert!(kept.network.arc(ArcId(3)).is_none());
        assert_eq!(kept.fixed, [(ArcId(1), 1), (ArcId(2), 1)].into());
        assert_eq!(fix_arc(&triangle(), ArcId(3), 3).unwrap_err(), FprasError::ValueOutOfRange { arc: ArcId(3), value: 3 });
    }

    #[test]
    fn scheme_on_t1() {
        let out = approx_scheme(&triangle(), &half(), 5, FprasOptions::default()).unwrap();
        assert_eq!(out.assignment.objective, Int::from(2));
        assert_eq!(out.rounds[0].fixed_arc, ArcId(3));
        assert_eq!(out.rounds[0].value, 0);
        let again = approx_scheme(&triangle(), &half(), 5, FprasOptions::default()).unwrap();
        assert_eq!(out.rounds, again.rounds);
    }
}
