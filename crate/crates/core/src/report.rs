//! Run reports: the JSON document every CLI command prints.

use std::collections::BTreeMap;
use std::time::Instant;

use num_rational::BigRational;
use serde::Serialize;
use thiserror::Error;

use crate::bp::{detect_uniqueness, run_observed, EngineError, EngineOptions, MessageState, PieceStats, Rounds, RunOptions, UniquenessOptions};
use crate::flowmodel::{ArcId, FlowAssignment, FlowNetwork};
use crate::fpras::{approx_scheme, DecimationRound, FprasError, FprasOptions};
use crate::int::Int;
use crate::oracles::{exact_solve, OracleError};

pub const REPORT_SCHEMA: &str = "flowbp.report.v1";

/// Field holding the only run-dependent value in a report.
pub const TIMING_FIELD: &str = "wall_time_ms";

#[derive(Debug, Error)]
pub enum RunError {
    #[error("infeasible")]
    Infeasible,
    #[error(transparent)]
    Oracle(OracleError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Fpras(#[from] FprasError),
}

impl From<OracleError> for RunError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::Infeasible => RunError::Infeasible,
            other => RunError::Oracle(other),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Solve,
    CheckUnique,
    Approx,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct InstanceSummary {
    pub nodes: usize,
    pub arcs: usize,
    pub c_max: Int,
}

impl InstanceSummary {
    pub fn of(network: &FlowNetwork) -> Self {
        InstanceSummary { nodes: network.node_count(), arcs: network.arc_count(), c_max: network.c_max().clone() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RunReport {
    pub schema: &'static str,
    pub mode: Mode,
    pub instance: InstanceSummary,
    pub rounds_used: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unique: Option<bool>,
    pub feasible: bool,
    pub flow: BTreeMap<ArcId, i64>,
    /// Recomputed from the original costs and `flow`.
    pub objective: Int,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub flat_arcs: Vec<ArcId>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub failing_arcs: Vec<ArcId>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub piece_stats: Vec<PieceStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decimation: Option<Vec<DecimationRound>>,
    pub wall_time_ms: u64,
}

impl RunReport {
    fn new(mode: Mode, network: &FlowNetwork, flow: BTreeMap<ArcId, i64>, rounds_used: u64, started: Instant) -> Self {
        let x = FlowAssignment::evaluate(network, flow);
        RunReport {
            schema: REPORT_SCHEMA,
            mode,
            instance: InstanceSummary::of(network),
            rounds_used,
            unique: None,
            feasible: x.feasible,
            flow: x.flows,
            objective: x.objective,
            seed: None,
            epsilon: None,
            flat_arcs: Vec::new(),
            failing_arcs: Vec::new(),
            piece_stats: Vec::new(),
            decimation: None,
            wall_time_ms: started.elapsed().as_millis() as u64,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// The report with the timing field removed, for reproducibility checks.
    pub fn without_timing(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("report serializes");
        v.as_object_mut().expect("report is an object").remove(TIMING_FIELD);
        v
    }
}

/// Fails with [`RunError::Infeasible`] unless some flow meets every demand.
pub fn feasibility_check(network: &FlowNetwork) -> Result<(), RunError> {
    exact_solve(network)?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SolveOptions {
    pub rounds: Rounds,
    pub threads: usize,
    pub normalize: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { rounds: Rounds::Auto, threads: 1, normalize: false }
    }
}

/// Feasibility check, then message passing for the requested rounds.
pub fn solve(
    network: &FlowNetwork,
    options: SolveOptions,
    observer: &mut dyn FnMut(&MessageState),
) -> Result<RunReport, RunError> {
    let started = Instant::now();
    feasibility_check(network)?;
    let engine = EngineOptions { threads: options.threads, normalize: options.normalize };
    let out = run_observed(network, RunOptions { rounds: options.rounds, patience: None, engine }, observer)?;
    let mut report = RunReport::new(Mode::Solve, network, out.assignment.flows, out.rounds_used, started);
    report.flat_arcs = out.flat_arcs;
    report.piece_stats = out.piece_stats;
    report.wall_time_ms = started.elapsed().as_millis() as u64;
    Ok(report)
}

/// Feasibility check, then the message-passing uniqueness test.
pub fn check_unique(network: &FlowNetwork, threads: usize) -> Result<RunReport, RunError> {
    let started = Instant::now();
    feasibility_check(network)?;
    let out = detect_uniqueness(network, UniquenessOptions { rounds: None, threads })?;
    let mut report = RunReport::new(Mode::CheckUnique, network, out.estimate.flows, out.rounds, started);
    report.unique = Some(out.unique);
    report.failing_arcs = out.failing_arcs;
    report.wall_time_ms = started.elapsed().as_millis() as u64;
    Ok(report)
}

/// Feasibility check, then the randomized approximation scheme.
pub fn approx(network: &FlowNetwork, eps: &BigRational, seed: u64, options: FprasOptions) -> Result<RunReport, RunError> {
    let started = Instant::now();
    feasibility_check(network)?;
    let out = approx_scheme(network, eps, seed, options)?;
    let rounds = out.rounds.iter().map(|r| r.rounds * (u64::from(r.restarts) + 1)).sum();
    let mut report = RunReport::new(Mode::Approx, network, out.assignment.flows, rounds, started);
    report.seed = Some(seed);
    report.epsilon = Some(eps.to_string());
    report.decimation = Some(out.rounds);
    report.wall_time_ms = started.elapsed().as_millis() as u64;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flowmodel::fixtures::triangle;
    use crate::flowmodel::{Arc, Capacity, Node, NodeId};

    #[test]
    fn solve_t1() {
        let r = solve(&triangle(), SolveOptions::default(), &mut |_| {}).unwrap();
        assert_eq!(r.objective, Int::from(2));
        assert_eq!(r.rounds_used, 12);
        assert_eq!(r.piece_stats.len(), 12);
        let v = r.without_timing();
        assert_eq!(v["schema"], REPORT_SCHEMA);
        assert_eq!(v["flow"]["1"], 1);
        assert!(v.get(TIMING_FIELD).is_none());
    }

    #[test]
    fn infeasible_instances_stop_before_message_passing() {
        let net = FlowNetwork::new(
            vec![Node { id: NodeId(1), demand: 3 }, Node { id: NodeId(2), demand: -3 }],
            vec![Arc::linear(1, 1, 2, Capacity::Finite(1), 1), Arc::linear(2, 1, 2, Capacity::Finite(1), 1)],
        )
        .unwrap();
        assert!(matches!(solve(&net, SolveOptions::default(), &mut |_| {}), Err(RunError::Infeasible)));
    }

    #[test]
    fn uniqueness_reports() {
        let r = check_unique(&triangle(), 1).unwrap();
        assert_eq!(r.unique, Some(true));
        assert_eq!(r.flow, [(ArcId(1), 1), (ArcId(2), 1), (ArcId(3), 0)].into());
        let tied = triangle().with_linear_costs(&[(ArcId(3), Int::from(2))].into()).unwrap();
        assert_eq!(check_unique(&tied, 1).unwrap().unique, Some(false));
    }

    #[test]
    fn approx_reports_are_reproducible() {
        let eps = BigRational::new(1.into(), 2.into());
        let a = approx(&triangle(), &eps, 7, FprasOptions::default()).unwrap();
        let b = approx(&triangle(), &eps, 7, FprasOptions { threads: 4, ..Default::default() }).unwrap();
        assert!(a.objective <= Int::from(3));
        assert_eq!(a.epsilon.as_deref(), Some("1/2"));
        assert_eq!(a.without_timing(), b.without_timing());
    }
}
