use std::collections::{BTreeMap, VecDeque};

use super::network::{ArcId, FlowNetwork, Node};
use super::FlowError;

/// A network with every node of degree at least two, plus the arc flows that
/// were forced while reducing it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Preprocessed {
    pub network: FlowNetwork,
    pub fixed: BTreeMap<ArcId, i64>,
}

/// Repeatedly drops isolated nodes and fixes the single arc at degree-1 nodes.
pub fn preprocess_degree(network: &FlowNetwork) -> Result<Preprocessed, FlowError> {
    let n = network.node_count();
    let arcs = network.arcs();
    let incidence = network.incidence_lists();
    let mut demand: Vec<i64> = network.nodes().iter().map(|v| v.demand).collect();
    let mut degree: Vec<usize> = incidence.iter().map(Vec::len).collect();
    let mut node_alive = vec![true; n];
    let mut arc_alive = vec![true; arcs.len()];
    let mut fixed = BTreeMap::new();

    let mut queue: VecDeque<usize> = (0..n).filter(|&v| degree[v] <= 1).collect();
    while let Some(v) = queue.pop_front() {
        if !node_alive[v] || degree[v] > 1 {
            continue;
        }
        let id = network.nodes()[v].id;
        if degree[v] == 0 {
            if demand[v] != 0 {
                return Err(FlowError::IsolatedDemand(id));
            }
            node_alive[v] = false;
            continue;
        }
        let e = *incidence[v].iter().find(|&&e| arc_alive[e]).expect("degree 1 node has a live arc");
        let arc = &arcs[e];
        // Δ(v,e)·x = f_v with Δ = ±1
        let x = arc.incidence(id) * demand[v];
        if !arc.capacity.admits(x) {
            return Err(FlowError::ForcedInfeasible { arc: arc.id, flow: x });
        }
        fixed.insert(arc.id, x);
        arc_alive[e] = false;
        node_alive[v] = false;
        demand[v] = 0;
        let w_id = arc.other_end(id);
        let w = network.node_position(w_id).unwrap();
        demand[w] -= arc.incidence(w_id) * x;
        degree[w] -= 1;
        if degree[w] <= 1 {
            queue.push_back(w);
        }
    }

    let nodes = network
        .nodes()
        .iter()
        .enumerate()
        .filter(|(i, _)| node_alive[*i])
        .map(|(i, v)| Node { id: v.id, demand: demand[i] })
        .collect();
    let kept = arcs.iter().zip(&arc_alive).filter(|(_, &alive)| alive).map(|(a, _)| a.clone()).collect();
    let network = FlowNetwork::new(nodes, kept).expect("reduction preserves validity");
    Ok(Preprocessed { network, fixed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flowmodel::fixtures::triangle;
    use crate::flowmodel::{Arc, Capacity, NodeId};

    fn pair(supply: i64) -> FlowNetwork {
        FlowNetwork::new(
            vec![Node { id: NodeId(1), demand: supply }, Node { id: NodeId(2), demand: -supply }],
            vec![Arc::linear(1, 1, 2, Capacity::Finite(2), 1)],
        )
        .unwrap()
    }

    #[test]
    fn forced_chain() {
        let p = preprocess_degree(&pair(1)).unwrap();
        assert_eq!(p.network.node_count(), 0);
        assert_eq!(p.network.arc_count(), 0);
        assert_eq!(p.fixed, [(ArcId(1), 1)].into());
    }

    #[test]
    fn t1_unchanged() {
        let p = preprocess_degree(&triangle()).unwrap();
        assert_eq!(p.network, triangle());
        assert!(p.fixed.is_empty());
    }

    #[test]
    fn forced_infeasible() {
        assert_eq!(
            preprocess_degree(&pair(3)).unwrap_err(),
            FlowError::ForcedInfeasible { arc: ArcId(1), flow: 3 }
        );
        assert_eq!(
            preprocess_degree(&pair(-1)).unwrap_err(),
            FlowError::ForcedInfeasible { arc: ArcId(1), flow: -1 }
        );
    }

    #[test]
    fn pendant_path_feeds_cycle() {
        // v4 → v1 pendant, then TRIANGLE
        let mut nodes = triangle().nodes().to_vec();
        nodes[0].demand = 0;
        nodes.push(Node { id: NodeId(4), demand: 1 });
        let mut arcs = triangle().arcs().to_vec();
        arcs.push(Arc::linear(4, 4, 1, Capacity::Finite(1), 5));
        let net = FlowNetwork::new(nodes, arcs).unwrap();
        let p = preprocess_degree(&net).unwrap();
        assert_eq!(p.fixed, [(ArcId(4), 1)].into());
        assert_eq!(p.network, triangle());
    }

    #[test]
    fn isolated_nodes() {
        let net = FlowNetwork::new(vec![Node { id: NodeId(7), demand: 0 }], vec![]).unwrap();
        assert_eq!(preprocess_degree(&net).unwrap().network.node_count(), 0);
        let net = FlowNetwork::new(
            vec![Node { id: NodeId(1), demand: 1 }, Node { id: NodeId(2), demand: -1 }],
            vec![],
        )
        .unwrap();
        assert_eq!(preprocess_degree(&net).unwrap_err(), FlowError::IsolatedDemand(NodeId(1)));
    }
}
