use std::collections::BTreeMap;

use crate::int::Int;
use crate::pwl::{Extended, PwlConvex};

use super::network::{Arc, ArcId, Capacity, FlowAssignment, FlowNetwork, Node, NodeId};

/// A flow instance with additional caps on the total inflow of each node.
/// Nodes missing from `inflow_caps` are uncapped.
#[derive(Clone, Debug)]
pub struct NodeCapacitated {
    pub network: FlowNetwork,
    pub inflow_caps: BTreeMap<NodeId, Capacity>,
}

/// The arc-capacitated equivalent of a [`NodeCapacitated`] instance.
#[derive(Clone, Debug)]
pub struct SplitNetwork {
    pub network: FlowNetwork,
    pub v_in: BTreeMap<NodeId, NodeId>,
    pub v_out: BTreeMap<NodeId, NodeId>,
    pub bridge: BTreeMap<NodeId, ArcId>,
}

impl SplitNetwork {
    /// Restricts a flow on the split network to the original arcs and
    /// re-evaluates it on `original`.
    pub fn project(&self, original: &FlowNetwork, x: &FlowAssignment) -> FlowAssignment {
        let flows = original.arcs().iter().map(|a| (a.id, x.flow(a.id))).collect();
        FlowAssignment::evaluate(original, flows)
    }
}

/// Splits node `v` (position `i`) into `v_in = 2i+1` and `v_out = 2i+2`,
/// joined by a zero-cost bridge carrying the node's inflow. Original arcs keep
/// their ids; bridges are numbered after the largest original arc id.
pub fn split_node_capacities(instance: &NodeCapacitated) -> SplitNetwork {
    let net = &instance.network;
    let first_bridge = net.arcs().iter().map(|a| a.id.0).max().unwrap_or(0) + 1;
    let mut nodes = Vec::with_capacity(2 * net.node_count());
    let mut arcs = Vec::with_capacity(net.arc_count() + net.node_count());
    let mut v_in = BTreeMap::new();
    let mut v_out = BTreeMap::new();
    let mut bridge = BTreeMap::new();
    for (i, v) in net.nodes().iter().enumerate() {
        let (a, b) = (NodeId(2 * i as u32 + 1), NodeId(2 * i as u32 + 2));
        nodes.push(Node { id: a, demand: 0 });
        nodes.push(Node { id: b, demand: v.demand });
        v_in.insert(v.id, a);
        v_out.insert(v.id, b);
        let capacity = instance.inflow_caps.get(&v.id).copied().unwrap_or(Capacity::Unbounded);
        let cost = PwlConvex::linear(Int::ZERO, Extended::from(0), capacity.as_extended()).expect("valid domain");
        let id = ArcId(first_bridge + i as u32);
        arcs.push(Arc { id, tail: a, head: b, capacity, cost });
        bridge.insert(v.id, id);
    }
    for a in net.arcs() {
        arcs.push(Arc { tail: v_out[&a.tail], head: v_in[&a.head], ..a.clone() });
    }
    let network = FlowNetwork::new(nodes, arcs).expect("split preserves validity");
    SplitNetwork { network, v_in, v_out, bridge }
}
