use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::int::Int;
use crate::pwl::{Extended, PwlConvex};

use super::ModelError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ArcId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

impl fmt::Display for ArcId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

/// Arc capacity; `Unbounded` is a sentinel, never a large number.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Capacity {
    Finite(i64),
    Unbounded,
}

impl Capacity {
    pub fn finite(self) -> Option<i64> {
        match self {
            Capacity::Finite(u) => Some(u),
            Capacity::Unbounded => None,
        }
    }

    pub fn admits(self, x: i64) -> bool {
        x >= 0 && self.finite().is_none_or(|u| x <= u)
    }

    pub fn as_extended(self) -> Extended {
        match self {
            Capacity::Finite(u) => Extended::from(u),
            Capacity::Unbounded => Extended::PosInf,
        }
    }
}

impl Serialize for Capacity {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Capacity::Finite(u) => s.serialize_i64(*u),
            Capacity::Unbounded => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Capacity {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Dto {
            Num(i64),
            Text(String),
        }
        match Dto::deserialize(d)? {
            Dto::Num(u) => Ok(Capacity::Finite(u)),
            Dto::Text(t) if t == "inf" => Ok(Capacity::Unbounded),
            Dto::Text(t) => Err(serde::de::Error::custom(format!("bad capacity {t:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Node {
    pub id: NodeId,
    /// Net supply `f_v`: outflow minus inflow.
    pub demand: i64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Arc {
    pub id: ArcId,
    pub tail: NodeId,
    pub head: NodeId,
    pub capacity: Capacity,
    /// Cost as a function of the flow; its domain is exactly `[0, capacity]`.
    pub cost: PwlConvex,
}

impl Arc {
    /// Arc with linear cost `slope · x`.
    pub fn linear(id: u32, tail: u32, head: u32, capacity: Capacity, slope: i64) -> Arc {
        let cost = PwlConvex::linear(Int::from(slope), Extended::from(0), capacity.as_extended())
            .expect("valid linear cost");
        Arc { id: ArcId(id), tail: NodeId(tail), head: NodeId(head), capacity, cost }
    }

    /// Slope of a single-piece cost, `None` for multi-piece costs.
    pub fn linear_cost(&self) -> Option<&Int> {
        match self.cost.slopes() {
            [s] => Some(s),
            _ => None,
        }
    }

    /// Signed incidence `Δ(v, e)`: +1 for the tail, −1 for the head.
    pub fn incidence(&self, v: NodeId) -> i64 {
        if v == self.tail {
            1
        } else if v == self.head {
            -1
        } else {
            0
        }
    }

    pub fn other_end(&self, v: NodeId) -> NodeId {
        if v == self.tail {
            self.head
        } else {
            self.tail
        }
    }
}

/// A validated min-cost flow instance. Immutable once built.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlowNetwork {
    nodes: Vec<Node>,
    arcs: Vec<Arc>,
    node_index: HashMap<NodeId, usize>,
    arc_index: HashMap<ArcId, usize>,
    c_max: Int,
}

impl FlowNetwork {
    /// Validates raw data into a network.
    pub fn new(nodes: Vec<Node>, arcs: Vec<Arc>) -> Result<Self, ModelError> {
        let mut node_index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if node_index.insert(n.id, i).is_some() {
                return Err(ModelError::DuplicateNode(n.id));
            }
        }
        let mut arc_index = HashMap::with_capacity(arcs.len());
        let mut c_max = Int::ZERO;
        for (i, a) in arcs.iter().enumerate() {
            if arc_index.insert(a.id, i).is_some() {
                return Err(ModelError::DuplicateArc(a.id));
            }
            for end in [a.tail, a.head] {
                if !node_index.contains_key(&end) {
                    return Err(ModelError::UnknownNode { arc: a.id, node: end });
                }
            }
            if a.tail == a.head {
                return Err(ModelError::SelfLoop(a.id));
            }
            if let Capacity::Finite(u) = a.capacity {
                if u < 0 {
                    return Err(ModelError::NegativeCapacity(a.id));
                }
            }
            if a.cost.domain() != (Extended::from(0), a.capacity.as_extended()) {
                return Err(ModelError::BadCostDomain(a.id));
            }
            for s in a.cost.slopes() {
                let s = s.abs();
                if s > c_max {
                    c_max = s;
                }
            }
        }
        let total: i128 = nodes.iter().map(|n| n.demand as i128).sum();
        if total != 0 {
            return Err(ModelError::DemandImbalance(total));
        }
        Ok(FlowNetwork { nodes, arcs, node_index, arc_index, c_max })
    }

    pub fn empty() -> Self {
        FlowNetwork::new(Vec::new(), Vec::new()).expect("empty network is valid")
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn arc_count(&self) -> usize {
        self.arcs.len()
    }

    /// Largest absolute slope of any arc cost.
    pub fn c_max(&self) -> &Int {
        &self.c_max
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.node_index.get(&id).map(|&i| &self.nodes[i])
    }

    pub fn arc(&self, id: ArcId) -> Option<&Arc> {
        self.arc_index.get(&id).map(|&i| &self.arcs[i])
    }

    pub fn node_position(&self, id: NodeId) -> Option<usize> {
        self.node_index.get(&id).copied()
    }

    pub fn arc_position(&self, id: ArcId) -> Option<usize> {
        self.arc_index.get(&id).copied()
    }

    pub fn demand(&self, id: NodeId) -> i64 {
        self.node(id).map_or(0, |n| n.demand)
    }

    /// Arc positions incident to each node position, in arc order.
    pub fn incidence_lists(&self) -> Vec<Vec<usize>> {
        let mut lists = vec![Vec::new(); self.nodes.len()];
        for (i, a) in self.arcs.iter().enumerate() {
            lists[self.node_index[&a.tail]].push(i);
            lists[self.node_index[&a.head]].push(i);
        }
        lists
    }

    /// True when every arc cost is a single linear piece.
    pub fn is_linear(&self) -> bool {
        self.arcs.iter().all(|a| a.linear_cost().is_some())
    }

    /// Same topology and data with the listed arc costs replaced.
    pub fn with_linear_costs(&self, costs: &BTreeMap<ArcId, Int>) -> Result<Self, ModelError> {
        let arcs = self
            .arcs
            .iter()
            .map(|a| {
                let mut a = a.clone();
                if let Some(c) = costs.get(&a.id) {
                    a.cost = PwlConvex::linear(c.clone(), Extended::from(0), a.capacity.as_extended())
                        .expect("valid linear cost");
                }
                a
            })
            .collect();
        FlowNetwork::new(self.nodes.clone(), arcs)
    }

    /// Same network with node demands replaced.
    pub fn with_demands(&self, demands: &BTreeMap<NodeId, i64>) -> Result<Self, ModelError> {
        let nodes = self
            .nodes
            .iter()
            .map(|n| Node { id: n.id, demand: demands.get(&n.id).copied().unwrap_or(n.demand) })
            .collect();
        FlowNetwork::new(nodes, self.arcs.clone())
    }
}

/// An arc → flow map with its objective under the network's costs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowAssignment {
    pub flows: BTreeMap<ArcId, i64>,
    pub objective: Int,
    /// Bounds and conservation hold at every node.
    pub feasible: bool,
}

impl FlowAssignment {
    /// Evaluates `flows` against `network`. Flows outside an arc's cost domain
    /// make the assignment infeasible; their cost contribution is skipped.
    pub fn evaluate(network: &FlowNetwork, flows: BTreeMap<ArcId, i64>) -> FlowAssignment {
        let mut objective = Int::ZERO;
        let mut feasible = true;
        let mut balance = vec![0i128; network.node_count()];
        for a in network.arcs() {
            let x = flows.get(&a.id).copied().unwrap_or(0);
            match a.cost.evaluate(&Int::from(x)) {
                Some(c) => objective += &c,
                None => feasible = false,
            }
            balance[network.node_position(a.tail).unwrap()] += x as i128;
            balance[network.node_position(a.head).unwrap()] -= x as i128;
        }
        if flows.keys().any(|id| network.arc(*id).is_none()) {
            feasible = false;
        }
        for (n, b) in network.nodes().iter().zip(&balance) {
            if *b != n.demand as i128 {
                feasible = false;
            }
        }
        FlowAssignment { flows, objective, feasible }
    }

    pub fn flow(&self, arc: ArcId) -> i64 {
        self.flows.get(&arc).copied().unwrap_or(0)
    }

    /// Flows as a vector in the network's arc order.
    pub fn as_vec(&self, network: &FlowNetwork) -> Vec<i64> {
        network.arcs().iter().map(|a| self.flow(a.id)).collect()
    }
}
