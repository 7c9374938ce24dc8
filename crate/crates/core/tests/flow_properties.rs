use std::collections::BTreeMap;

use flowbp_core::flowmodel::{preprocess_degree, split_node_capacities, NodeCapacitated};
use flowbp_core::generate::{generate, GenParams};
use flowbp_core::oracles::{enumerate_integral_flows, exact_solve, is_unique_optimum, DEFAULT_ENUMERATION_BUDGET};
use flowbp_core::{emit_dimacs, from_json, parse_dimacs, to_json, Capacity, FlowAssignment, FlowNetwork, NodeId};
use proptest::prelude::*;

fn network() -> impl Strategy<Value = FlowNetwork> {
    (2usize..=5, 0usize..=3, 0i64..=6, 1i64..=3, any::<u64>()).prop_map(|(n, extra, c_max, cap_max, seed)| {
        generate(&GenParams::new(n, n - 1 + extra, c_max, cap_max, seed)).expect("generation")
    })
}

fn convex_network() -> impl Strategy<Value = FlowNetwork> {
    (2usize..=4, 0usize..=2, any::<u64>()).prop_map(|(n, extra, seed)| {
        let params = GenParams { pieces: Some(1..=3), ..GenParams::new(n, n - 1 + extra, 5, 3, seed) };
        generate(&params).expect("generation")
    })
}

fn optima(net: &FlowNetwork) -> Vec<FlowAssignment> {
    let all = enumerate_integral_flows(net, DEFAULT_ENUMERATION_BUDGET).unwrap();
    let best = all[0].objective.clone();
    all.into_iter().take_while(|x| x.objective == best).collect()
}

fn inflow(net: &FlowNetwork, x: &FlowAssignment, v: NodeId) -> i64 {
    net.arcs().iter().filter(|a| a.head == v).map(|a| x.flow(a.id)).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    #[test]
    fn dimacs_round_trip(net in network()) {
        let text = emit_dimacs(&net).unwrap();
        prop_assert_eq!(parse_dimacs(&text).unwrap(), net);
    }

    #[test]
    fn json_round_trip(net in convex_network()) {
        prop_assert_eq!(from_json(&to_json(&net)).unwrap(), net);
    }

    #[test]
    fn exact_solver_matches_enumeration(net in convex_network()) {
        let x = exact_solve(&net).unwrap();
        let best = optima(&net);
        prop_assert!(x.feasible);
        prop_assert_eq!(&x.objective, &best[0].objective);
        prop_assert_eq!(is_unique_optimum(&net, &x).unwrap(), best.len() == 1);
    }

    #[test]
    fn preprocessing_keeps_the_optimum(net in network()) {
        let pre = preprocess_degree(&net).unwrap();
        let rest = exact_solve(&pre.network).unwrap();
        let mut flows: BTreeMap<_, _> = pre.fixed.clone();
        flows.extend(rest.flows);
        let x = FlowAssignment::evaluate(&net, flows);
        prop_assert!(x.feasible);
        prop_assert_eq!(x.objective, exact_solve(&net).unwrap().objective);
        let degree = |v: NodeId| pre.network.arcs().iter().filter(|a| a.tail == v || a.head == v).count();
        let min_degree = pre.network.nodes().iter().map(|v| degree(v.id)).min().unwrap_or(2);
        prop_assert!(min_degree >= 2);
    }

    #[test]
    fn node_splitting_respects_inflow_caps(net in network(), cap in 0i64..=3) {
        let capped = net.nodes()[0].id;
        let instance = NodeCapacitated { network: net.clone(), inflow_caps: [(capped, Capacity::Finite(cap))].into() };
        let split = split_node_capacities(&instance);
        let allowed: Vec<_> = enumerate_integral_flows(&net, DEFAULT_ENUMERATION_BUDGET)
            .unwrap()
            .into_iter()
            .filter(|x| inflow(&net, x, capped) <= cap)
            .collect();
        match exact_solve(&split.network) {
            Ok(y) => {
                let x = split.project(&net, &y);
                prop_assert!(x.feasible);
                prop_assert!(inflow(&net, &x, capped) <= cap);
                prop_assert_eq!(&x.objective, &allowed[0].objective);
            }
            Err(_) => prop_assert!(allowed.is_empty()),
        }
    }
}
