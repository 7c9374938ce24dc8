use std::collections::BTreeMap;

use crate::flowmodel::{FlowAssignment, FlowNetwork};

use super::OracleError;

pub const DEFAULT_ENUMERATION_BUDGET: u64 = 10_000_000;

/// Every feasible integral flow, sorted by objective and then by the flow
/// vector in arc order.
pub fn enumerate_integral_flows(network: &FlowNetwork, budget: u64) -> Result<Vec<FlowAssignment>, OracleError> {
    let mut caps = Vec::with_capacity(network.arc_count());
    let mut size: u128 = 1;
    for a in network.arcs() {
        let u = a.capacity.finite().ok_or(OracleError::UnboundedCapacity(a.id))?;
        caps.push(u);
        size = size.saturating_mul(u as u128 + 1);
    }
    if size > budget as u128 {
        return Err(OracleError::BudgetExceeded { size, budget });
    }

    let ends: Vec<(usize, usize)> = network
        .arcs()
        .iter()
        .map(|a| (network.node_position(a.tail).unwrap(), network.node_position(a.head).unwrap()))
        .collect();
    // nodes whose balance is final once arc k is assigned
    let mut closes: Vec<Vec<usize>> = vec![Vec::new(); caps.len()];
    let mut unchecked = Vec::new();
    for (v, arcs) in network.incidence_lists().iter().enumerate() {
        match arcs.iter().max() {
            Some(&last) => closes[last].push(v),
            None => unchecked.push(v),
        }
    }
    let demand: Vec<i64> = network.nodes().iter().map(|v| v.demand).collect();
    if unchecked.iter().any(|&v| demand[v] != 0) {
        return Ok(Vec::new());
    }

    let mut found = Vec::new();
    let mut x = vec![0i64; caps.len()];
    let mut balance = vec![0i64; demand.len()];
    search(0, &caps, &ends, &closes, &demand, &mut x, &mut balance, &mut found);

    let mut out: Vec<(FlowAssignment, Vec<i64>)> = found
        .into_iter()
        .map(|xs| {
            let flows: BTreeMap<_, _> = network.arcs().iter().map(|a| a.id).zip(xs.iter().copied()).collect();
            (FlowAssignment::evaluate(network, flows), xs)
        })
        .collect();
    out.sort_by(|a, b| a.0.objective.cmp(&b.0.objective).then_with(|| a.1.cmp(&b.1)));
    Ok(out.into_iter().map(|(x, _)| x).collect())
}

#[allow(clippy::too_many_arguments)]
fn search(
    k: usize,
    caps: &[i64],
    ends: &[(usize, usize)],
    closes: &[Vec<usize>],
    demand: &[i64],
    x: &mut Vec<i64>,
    balance: &mut Vec<i64>,
    found: &mut Vec<Vec<i64>>,
) {
    if k == caps.len() {
        found.push(x.clone());
        return;
    }
    let (t, h) = ends[k];
    for val in 0..=caps[k] {
        x[k] = val;
        balance[t] += val;
        balance[h] -= val;
        if closes[k].iter().all(|&v| balance[v] == demand[v]) {
            search(k + 1, caps, ends, closes, demand, x, balance, found);
        }
        balance[t] -= val;
        balance[h] += val;
    }
    x[k] = 0;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flowmodel::fixtures::triangle;
    use crate::flowmodel::{ArcId, NodeId};
    use crate::int::Int;

    #[test]
    fn t1_has_two_flows() {
        let net = triangle();
        let all = enumerate_integral_flows(&net, DEFAULT_ENUMERATION_BUDGET).unwrap();
        let got: Vec<(Vec<i64>, Int)> = all.iter().map(|x| (x.as_vec(&net), x.objective.clone())).collect();
        assert_eq!(got, vec![(vec![1, 1, 0], Int::from(2)), (vec![0, 0, 1], Int::from(3))]);
        assert!(all.iter().all(|x| x.feasible));
    }

    #[test]
    fn tie_and_infeasible() {
        let tied = triangle().with_linear_costs(&[(ArcId(3), Int::from(2))].into()).unwrap();
        let all = enumerate_integral_flows(&tied, DEFAULT_ENUMERATION_BUDGET).unwrap();
        assert_eq!(all.len(), 2);
        assert!(all.iter().all(|x| x.objective == Int::from(2)));

        let too_much = triangle().with_demands(&[(NodeId(1), 5), (NodeId(3), -5)].into()).unwrap();
        assert!(enumerate_integral_flows(&too_much, DEFAULT_ENUMERATION_BUDGET).unwrap().is_empty());
    }

    #[test]
    fn budget() {
        assert!(matches!(enumerate_integral_flows(&triangle(), 26), Err(OracleError::BudgetExceeded { size: 27, .. })));
    }
}
