use std::collections::VecDeque;

use crate::flowmodel::{ArcId, FlowNetwork, NodeId};
use crate::int::Int;

use super::OracleError;

pub const DEFAULT_TREE_BUDGET: usize = 100_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeVertex {
    /// Original node this vertex copies.
    pub node: NodeId,
    pub level: usize,
    /// Tree arc towards the root; for the two root vertices this is the root arc.
    pub parent_arc: usize,
    pub child_arcs: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeArc {
    /// Original arc this tree arc copies, with the same orientation.
    pub arc: ArcId,
    pub tail: usize,
    pub head: usize,
}

/// Depth-`depth` unwrapping of a network around a root arc. Vertices at level
/// `depth` are leaves and carry no conservation constraint.
#[derive(Clone, Debug)]
pub struct ComputationTree {
    pub vertices: Vec<TreeVertex>,
    /// Arc 0 is the root arc, between vertices 0 (its tail) and 1 (its head).
    pub arcs: Vec<TreeArc>,
    pub depth: usize,
    demands: Vec<i64>,
    /// Cost at each integral flow `0..=u`, indexed by original arc position.
    cost_tables: Vec<Vec<Int>>,
    arc_positions: Vec<usize>,
}

impl ComputationTree {
    pub fn is_interior(&self, v: usize) -> bool {
        self.vertices[v].level < self.depth
    }

    fn table(&self, tree_arc: usize) -> &[Int] {
        &self.cost_tables[self.arc_positions[tree_arc]]
    }
}

pub fn build_tree(network: &FlowNetwork, root: ArcId, depth: usize, budget: usize) -> Result<ComputationTree, OracleError> {
    let root_pos = network.arc_position(root).ok_or(OracleError::UnknownArc(root))?;
    let mut cost_tables = Vec::with_capacity(network.arc_count());
    for a in network.arcs() {
        let u = a.capacity.finite().ok_or(OracleError::UnboundedCapacity(a.id))?;
        cost_tables.push((0..=u).map(|z| a.cost.evaluate(&Int::from(z)).expect("in domain")).collect());
    }
    let incidence = network.incidence_lists();
    let arcs = network.arcs();
    let root_arc = &arcs[root_pos];

    let mut vertices = vec![
        TreeVertex { node: root_arc.tail, level: 0, parent_arc: 0, child_arcs: Vec::new() },
        TreeVertex { node: root_arc.head, level: 0, parent_arc: 0, child_arcs: Vec::new() },
    ];
    let mut tree_arcs = vec![TreeArc { arc: root, tail: 0, head: 1 }];
    let mut arc_positions = vec![root_pos];
    let mut queue = VecDeque::from([0usize, 1]);
    while let Some(v) = queue.pop_front() {
        if vertices[v].level >= depth {
            continue;
        }
        let node = vertices[v].node;
        let via = arc_positions[vertices[v].parent_arc];
        for &pos in &incidence[network.node_position(node).unwrap()] {
            if pos == via {
                continue;
            }
            if vertices.len() >= budget {
                return Err(OracleError::SizeBudget { budget });
            }
            let a = &arcs[pos];
            let child = vertices.len();
            let t = tree_arcs.len();
            let (tail, head) = if a.tail == node { (v, child) } else { (child, v) };
            tree_arcs.push(TreeArc { arc: a.id, tail, head });
            arc_positions.push(pos);
            vertices.push(TreeVertex { node: a.other_end(node), level: vertices[v].level + 1, parent_arc: t, child_arcs: Vec::new() });
            vertices[v].child_arcs.push(t);
            queue.push_back(child);
        }
    }
    let demands = vertices.iter().map(|v| network.demand(v.node)).collect();
    Ok(ComputationTree { vertices, arcs: tree_arcs, depth, demands, cost_tables, arc_positions })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RootFlow {
    Fixed(i64),
    Free,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeSolution {
    pub value: Int,
    /// Smallest optimal root flow (equal to the fixed value when fixed).
    pub root_flow: i64,
}

/// Min-plus table over a contiguous integer range starting at `offset`.
struct Table {
    offset: i64,
    vals: Vec<Option<Int>>,
}

impl Table {
    fn unit() -> Table {
        Table { offset: 0, vals: vec![Some(Int::ZERO)] }
    }

    fn get(&self, s: i64) -> Option<&Int> {
        let i = s.checked_sub(self.offset)?;
        if i < 0 {
            return None;
        }
        self.vals.get(i as usize)?.as_ref()
    }

    /// `(self ⊕ g)(s) = min_x self(s − sign·x) + g[x]`.
    fn convolve(&self, sign: i64, g: &[Option<Int>]) -> Table {
        let span = g.len() as i64 - 1;
        let offset = if sign > 0 { self.offset } else { self.offset - span };
        let mut vals: Vec<Option<Int>> = vec![None; self.vals.len() + g.len() - 1];
        for (i, a) in self.vals.iter().enumerate() {
            let Some(a) = a else { continue };
            for (x, b) in g.iter().enumerate() {
                let Some(b) = b else { continue };
                let s = self.offset + i as i64 + sign * x as i64;
                let slot = &mut vals[(s - offset) as usize];
                let cand = a + b;
                if slot.as_ref().is_none_or(|c| cand < *c) {
                    *slot = Some(cand);
                }
            }
        }
        Table { offset, vals }
    }
}

/// Exact optimum of the flow problem on the tree, by leaf-to-root dynamic
/// programming over integral flows.
pub fn tree_solve(tree: &ComputationTree, root: RootFlow) -> Result<TreeSolution, OracleError> {
    // below[a][x]: best cost of arc a and everything beneath it at flow x
    let mut below: Vec<Option<Vec<Option<Int>>>> = vec![None; tree.arcs.len()];
    for v in (2..tree.vertices.len()).rev() {
        let a = tree.vertices[v].parent_arc;
        let table = tree.table(a);
        let sign = incidence(tree, v, a);
        let h = children_table(tree, v, &below);
        let vals = table
            .iter()
            .enumerate()
            .map(|(x, c)| match &h {
                None => Some(c.clone()),
                Some(h) => h.get(tree.demands[v] - sign * x as i64).map(|r| c + r),
            })
            .collect();
        below[a] = Some(vals);
    }
    let hv = children_table(tree, 0, &below);
    let hw = children_table(tree, 1, &below);
    let value_at = |z: i64| -> Option<Int> {
        let mut total = tree.table(0).get(usize::try_from(z).ok()?)?.clone();
        for (v, h) in [(0, &hv), (1, &hw)] {
            if let Some(h) = h {
                total += h.get(tree.demands[v] - incidence(tree, v, 0) * z)?;
            }
        }
        Some(total)
    };
    match root {
        RootFlow::Fixed(z) => value_at(z).map(|value| TreeSolution { value, root_flow: z }).ok_or(OracleError::Infeasible),
        RootFlow::Free => {
            let mut best: Option<TreeSolution> = None;
            for z in 0..tree.table(0).len() as i64 {
                if let Some(value) = value_at(z) {
                    if best.as_ref().is_none_or(|b| value < b.value) {
                        best = Some(TreeSolution { value, root_flow: z });
                    }
                }
            }
            best.ok_or(OracleError::Infeasible)
        }
    }
}

fn incidence(tree: &ComputationTree, v: usize, a: usize) -> i64 {
    if tree.arcs[a].tail == v {
        1
    } else {
        -1
    }
}

/// Min cost of the child subtrees of `v` as a function of their signed
/// outflow; `None` for leaves, which impose no conservation.
fn children_table(tree: &ComputationTree, v: usize, below: &[Option<Vec<Option<Int>>>]) -> Option<Table> {
    if !tree.is_interior(v) {
        return None;
    }
    let mut h = Table::unit();
    for &b in &tree.vertices[v].child_arcs {
        h = h.convolve(incidence(tree, v, b), below[b].as_ref().expect("children first"));
    }
    Some(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flowmodel::fixtures::triangle;
    use crate::flowmodel::{Arc, Capacity, Node};

    #[test]
    fn sizes() {
        let net = triangle();
        let t0 = build_tree(&net, ArcId(1), 0, DEFAULT_TREE_BUDGET).unwrap();
        assert_eq!((t0.vertices.len(), t0.arcs.len()), (2, 1));
        let t1_ = build_tree(&net, ArcId(1), 1, DEFAULT_TREE_BUDGET).unwrap();
        assert_eq!((t1_.vertices.len(), t1_.arcs.len()), (4, 3));
        let names: Vec<(u32, u32)> = t1_.vertices[2..].iter().map(|v| (v.node.0, t1_.arcs[v.parent_arc].arc.0)).collect();
        assert_eq!(names, vec![(3, 3), (3, 2)]);
        let mut last = 0;
        for depth in 0..6 {
            let t = build_tree(&net, ArcId(2), depth, DEFAULT_TREE_BUDGET).unwrap();
            assert!(t.vertices.len() > last);
            last = t.vertices.len();
        }
    }

    #[test]
    fn budget_is_enforced() {
        assert_eq!(build_tree(&triangle(), ArcId(1), 30, 50).unwrap_err(), OracleError::SizeBudget { budget: 50 });
    }

    #[test]
    fn two_node_network_has_no_children_through_parent() {
        let net = FlowNetwork::new(
            vec![Node { id: NodeId(1), demand: 1 }, Node { id: NodeId(2), demand: -1 }],
            vec![Arc::linear(1, 1, 2, Capacity::Finite(1), 1)],
        )
        .unwrap();
        let t = build_tree(&net, ArcId(1), 3, DEFAULT_TREE_BUDGET).unwrap();
        assert_eq!(t.vertices.len(), 2);
    }

    #[test]
    fn depth_one_values() {
        // root e1 carries z; v1' sends 1 − z over e3 and v2' passes z on over e2
        let t = build_tree(&triangle(), ArcId(1), 1, DEFAULT_TREE_BUDGET).unwrap();
        let v = |z| tree_solve(&t, RootFlow::Fixed(z)).map(|s| s.value);
        assert_eq!(v(0), Ok(Int::from(3)));
        assert_eq!(v(1), Ok(Int::from(2)));
        assert_eq!(v(2), Err(OracleError::Infeasible));
        assert_eq!(v(3), Err(OracleError::Infeasible));
        assert_eq!(tree_solve(&t, RootFlow::Free).unwrap(), TreeSolution { value: Int::from(2), root_flow: 1 });
    }

    #[test]
    fn depth_zero_is_the_arc_cost() {
        let t = build_tree(&triangle(), ArcId(3), 0, DEFAULT_TREE_BUDGET).unwrap();
        assert_eq!(tree_solve(&t, RootFlow::Free).unwrap(), TreeSolution { value: Int::ZERO, root_flow: 0 });
        assert_eq!(tree_solve(&t, RootFlow::Fixed(2)).unwrap().value, Int::from(6));
    }
}
