use std::collections::BTreeMap;

use crate::flowmodel::{FlowAssignment, FlowNetwork};

use super::OracleError;

const INF_CAP: i64 = i64::MAX / 4;

struct Edge {
    to: usize,
    cap: i64,
    cost: i128,
}

#[derive(Default)]
struct Graph {
    edges: Vec<Edge>,
    adj: Vec<Vec<usize>>,
}

impl Graph {
    fn with_nodes(n: usize) -> Self {
        Graph { edges: Vec::new(), adj: vec![Vec::new(); n] }
    }

    /// Adds `u → v` and its reverse; returns the forward edge index. Edge
    /// `i ^ 1` is always the reverse of edge `i`.
    fn add(&mut self, u: usize, v: usize, cap: i64, cost: i128) -> usize {
        let i = self.edges.len();
        self.edges.push(Edge { to: v, cap, cost });
        self.edges.push(Edge { to: u, cap: 0, cost: -cost });
        self.adj[u].push(i);
        self.adj[v].push(i + 1);
        i
    }

    fn push(&mut self, i: usize, amount: i64) {
        self.edges[i].cap -= amount;
        self.edges[i ^ 1].cap += amount;
    }

    /// Bellman-Ford (queue based) shortest path tree from `s`.
    fn shortest_paths(&self, s: usize) -> Vec<Option<usize>> {
        let n = self.adj.len();
        let mut dist: Vec<Option<i128>> = vec![None; n];
        let mut pred = vec![None; n];
        let mut in_queue = vec![false; n];
        let mut queue = std::collections::VecDeque::from([s]);
        dist[s] = Some(0);
        while let Some(u) = queue.pop_front() {
            in_queue[u] = false;
            let du = dist[u].unwrap();
            for &i in &self.adj[u] {
                let e = &self.edges[i];
                if e.cap == 0 {
                    continue;
                }
                let cand = du + e.cost;
                if dist[e.to].is_none_or(|d| cand < d) {
                    dist[e.to] = Some(cand);
                    pred[e.to] = Some(i);
                    if !in_queue[e.to] {
                        in_queue[e.to] = true;
                        queue.push_back(e.to);
                    }
                }
            }
        }
        pred
    }
}

/// Exact minimum-cost integral flow by successive shortest paths. Every cost
/// piece becomes its own parallel arc; negative pieces start saturated so the
/// residual graph has no negative cycle.
pub fn exact_solve(network: &FlowNetwork) -> Result<FlowAssignment, OracleError> {
    let n = network.node_count();
    let (source, sink) = (n, n + 1);
    let mut g = Graph::with_nodes(n + 2);
    let mut excess: Vec<i128> = network.nodes().iter().map(|v| v.demand as i128).collect();
    let mut pieces: Vec<(usize, usize, i64)> = Vec::new(); // (arc position, edge, initial cap)

    for (pos, a) in network.arcs().iter().enumerate() {
        let u = network.node_position(a.tail).unwrap();
        let v = network.node_position(a.head).unwrap();
        let knots = a.cost.knots();
        for (p, slope) in a.cost.slopes().iter().enumerate() {
            let cost = slope.to_i128().ok_or(OracleError::Overflow(a.id))?;
            let len = match knots.get(p + 1) {
                Some(hi) => (hi - &knots[p]).to_i64().expect("capacity fits i64"),
                None => {
                    if cost < 0 {
                        return Err(OracleError::UnboundedObjective);
                    }
                    INF_CAP
                }
            };
            let i = g.add(u, v, len, cost);
            if cost < 0 {
                g.push(i, len);
                excess[u] -= len as i128;
                excess[v] += len as i128;
            }
            pieces.push((pos, i, len));
        }
    }

    let mut required: i128 = 0;
    for (v, &b) in excess.iter().enumerate() {
        if b > 0 {
            g.add(source, v, b as i64, 0);
            required += b;
        } else if b < 0 {
            g.add(v, sink, (-b) as i64, 0);
        }
    }

    while required > 0 {
        let pred = g.shortest_paths(source);
        if pred[sink].is_none() {
            return Err(OracleError::Infeasible);
        }
        let mut bottleneck = i64::MAX;
        let mut v = sink;
        while v != source {
            let i = pred[v].unwrap();
            bottleneck = bottleneck.min(g.edges[i].cap);
            v = g.edges[i ^ 1].to;
        }
        let mut v = sink;
        while v != source {
            let i = pred[v].unwrap();
            g.push(i, bottleneck);
            v = g.edges[i ^ 1].to;
        }
        required -= bottleneck as i128;
    }

    let mut flows: BTreeMap<_, i64> = network.arcs().iter().map(|a| (a.id, 0)).collect();
    for (pos, i, len) in pieces {
        *flows.get_mut(&network.arcs()[pos].id).unwrap() += len - g.edges[i].cap;
    }
    let x = FlowAssignment::evaluate(network, flows);
    debug_assert!(x.feasible);
    Ok(x)
}
