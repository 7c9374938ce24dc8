use serde::Serialize;

use crate::int::Int;

use super::network::{ArcId, FlowAssignment, FlowNetwork, NodeId};
use super::FlowError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ResidualArc {
    pub arc: ArcId,
    pub direction: Direction,
    pub tail: NodeId,
    pub head: NodeId,
    pub cost: Int,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResidualGraph {
    pub nodes: Vec<NodeId>,
    pub arcs: Vec<ResidualArc>,
}

/// Residual graph of a feasible flow: forward arcs priced at the right
/// derivative, backward arcs at the negated left derivative.
pub fn residual_graph(network: &FlowNetwork, x: &FlowAssignment) -> Result<ResidualGraph, FlowError> {
    let check = FlowAssignment::evaluate(network, x.flows.clone());
    if !check.feasible {
        return Err(FlowError::InfeasibleFlow("bounds or conservation violated".into()));
    }
    let mut arcs = Vec::new();
    for a in network.arcs() {
        let z = Int::from(x.flow(a.id));
        if let Some(s) = a.cost.right_slope(&z) {
            arcs.push(ResidualArc { arc: a.id, direction: Direction::Forward, tail: a.tail, head: a.head, cost: s.clone() });
        }
        if let Some(s) = a.cost.left_slope(&z) {
            arcs.push(ResidualArc { arc: a.id, direction: Direction::Backward, tail: a.head, head: a.tail, cost: -s });
        }
    }
    Ok(ResidualGraph { nodes: network.nodes().iter().map(|n| n.id).collect(), arcs })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum CycleCost {
    Min(Int),
    NoCycle,
    NegativeCycle,
}

/// Minimum cost of a directed cycle. The two opposite residual copies of one
/// arc never form a cycle together: for every residual arc `u→w` the return
/// path `w⇝u` avoids that arc's twin.
pub fn min_cycle_cost(residual: &ResidualGraph) -> CycleCost {
    let n = residual.nodes.len();
    let pos = |id: NodeId| residual.nodes.iter().position(|&v| v == id).expect("residual node");
    let edges: Vec<(usize, usize, &Int)> =
        residual.arcs.iter().map(|a| (pos(a.tail), pos(a.head), &a.cost)).collect();
    let twin: Vec<Option<usize>> = residual
        .arcs
        .iter()
        .map(|a| residual.arcs.iter().position(|b| b.arc == a.arc && b.direction != a.direction))
        .collect();

    // A virtual source at distance 0 to every node finds any negative cycle.
    let mut dist = vec![Int::ZERO; n];
    for round in 0..=n {
        let mut changed = false;
        for &(u, w, c) in &edges {
            let cand = &dist[u] + c;
            if cand < dist[w] {
                dist[w] = cand;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        if round == n {
            return CycleCost::NegativeCycle;
        }
    }

    let mut best: Option<Int> = None;
    for (i, &(u, w, c)) in edges.iter().enumerate() {
        if let Some(d) = shortest_path(n, &edges, w, u, twin[i]) {
            let total = &d + c;
            if best.as_ref().is_none_or(|b| total < *b) {
                best = Some(total);
            }
        }
    }
    best.map_or(CycleCost::NoCycle, CycleCost::Min)
}

/// Bellman-Ford distance `from → to` skipping edge `skip`; assumes no
/// negative cycles.
fn shortest_path(n: usize, edges: &[(usize, usize, &Int)], from: usize, to: usize, skip: Option<usize>) -> Option<Int> {
    let mut dist: Vec<Option<Int>> = vec![None; n];
    dist[from] = Some(Int::ZERO);
    for _ in 0..n {
        let mut changed = false;
        for (i, &(u, w, c)) in edges.iter().enumerate() {
            if Some(i) == skip {
                continue;
            }
            if let Some(du) = &dist[u] {
                let cand = du + c;
                if dist[w].as_ref().is_none_or(|dw| cand < *dw) {
                    dist[w] = Some(cand);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    dist[to].take()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flowmodel::fixtures::triangle;
    use crate::flowmodel::{Arc, Capacity, Node};
    use crate::pwl::{Extended, PwlConvex};

    fn flows(net: &FlowNetwork, xs: &[i64]) -> FlowAssignment {
        FlowAssignment::evaluate(net, net.arcs().iter().map(|a| a.id).zip(xs.iter().copied()).collect())
    }

    #[test]
    fn t1_residual_at_path_flow() {
        let net = triangle();
        let r = residual_graph(&net, &flows(&net, &[1, 1, 0])).unwrap();
        let summary: Vec<(u32, Direction, i64)> =
            r.arcs.iter().map(|a| (a.arc.0, a.direction, a.cost.to_i64().unwrap())).collect();
        use Direction::*;
        assert_eq!(summary, vec![(1, Forward, 1), (1, Backward, -1), (2, Forward, 1), (2, Backward, -1), (3, Forward, 3)]);
        assert_eq!(min_cycle_cost(&r), CycleCost::Min(Int::from(1)));
    }

    #[test]
    fn t1_direct_flow_has_negative_cycle() {
        let net = triangle();
        let r = residual_graph(&net, &flows(&net, &[0, 0, 1])).unwrap();
        assert_eq!(min_cycle_cost(&r), CycleCost::NegativeCycle);
    }

    #[test]
    fn zero_flow_forward_only() {
        let net = triangle().with_demands(&[(NodeId(1), 0), (NodeId(3), 0)].into()).unwrap();
        let r = residual_graph(&net, &flows(&net, &[0, 0, 0])).unwrap();
        assert!(r.arcs.iter().all(|a| a.direction == Direction::Forward));
        let costs: Vec<i64> = r.arcs.iter().map(|a| a.cost.to_i64().unwrap()).collect();
        assert_eq!(costs, vec![1, 1, 3]);
        // all arcs point "downhill" from v1 to v3
        assert_eq!(min_cycle_cost(&r), CycleCost::NoCycle);
    }

    #[test]
    fn pwl_one_sided_derivatives() {
        let cost = PwlConvex::new(
            vec![Extended::from(0), Extended::from(1), Extended::from(2)],
            vec![Int::from(1), Int::from(4)],
            (Int::ZERO, Int::ZERO),
        )
        .unwrap();
        let net = FlowNetwork::new(
            vec![Node { id: NodeId(1), demand: 1 }, Node { id: NodeId(2), demand: -1 }],
            vec![Arc { id: ArcId(1), tail: NodeId(1), head: NodeId(2), capacity: Capacity::Finite(2), cost }],
        )
        .unwrap();
        let r = residual_graph(&net, &flows(&net, &[1])).unwrap();
        assert_eq!(r.arcs[0].cost, Int::from(4));
        assert_eq!(r.arcs[1].cost, Int::from(-1));
    }

    #[test]
    fn infeasible_flow_rejected() {
        let net = triangle();
        assert!(residual_graph(&net, &flows(&net, &[1, 0, 0])).is_err());
    }
}
