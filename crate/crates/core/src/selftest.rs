//! Built-in consistency suites: the engine against the oracles on fixed and
//! seeded random instances.

use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::bp::{detect_uniqueness, run, Engine, EngineError, EngineOptions, RunOptions, UniquenessOptions};
use crate::flowmodel::{iteration_bound, preprocess_degree, ArcId, BoundMode, FlowNetwork};
use crate::fpras::{approx_scheme, FprasOptions};
use crate::generate::{generate, oscillating_triangle, GenParams, Optimum};
use crate::int::Int;
use crate::oracles::grid::{compare_on_grid, random_raw, to_pwl};
use crate::oracles::{build_tree, exact_solve, tree_solve, RootFlow, DEFAULT_TREE_BUDGET};
use crate::pwl::{PwlConvex, Sign};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub checks: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

type Suite = Box<dyn Fn() -> Result<usize, String>>;

/// Runs every suite; `quick` shrinks the random batches.
pub fn run_selftest(quick: bool) -> Vec<SuiteResult> {
    let scale: u64 = if quick { 1 } else { 5 };
    let suites: Vec<(&'static str, Suite)> = vec![
        ("pwl-grid", Box::new(move || pwl_grid(40 * scale as usize, 7))),
        ("triangle", Box::new(triangle)),
        ("oscillation", Box::new(move || oscillation(if quick { &[6, 12, 24] } else { &[6, 12, 24, 48, 96] }))),
        ("bp-vs-exact", Box::new(move || bp_vs_exact(4 * scale, 11))),
        ("tree-identity", Box::new(move || tree_batch(2 * scale, 13))),
        ("uniqueness", Box::new(move || uniqueness_batch(2 * scale, 17))),
        ("approx", Box::new(move || approx_batch(if quick { 1 } else { 3 }, 19))),
    ];
    suites
        .into_iter()
        .map(|(name, f)| match f() {
            Ok(checks) => SuiteResult { name, passed: true, checks, detail: None },
            Err(e) => SuiteResult { name, passed: false, checks: 0, detail: Some(e) },
        })
        .collect()
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// First round from which the estimate of `arc` never changes again, up to
/// the convergence bound.
pub fn settle_round(network: &FlowNetwork, arc: ArcId) -> Result<u64, EngineError> {
    let bound = iteration_bound(network, BoundMode::Convergence);
    let engine = Engine::new(network, EngineOptions { threads: 1, normalize: true })?;
    let mut state = engine.init();
    let mut history = Vec::with_capacity(bound as usize);
    while state.round < bound {
        state = engine.update_round(&state)?;
        history.push(engine.estimate(&state)?.assignment.flow(arc));
    }
    let last = *history.last().ok_or(EngineError::NoRounds)?;
    Ok(history.iter().rposition(|&x| x != last).map_or(1, |i| i as u64 + 2))
}

pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Checks that after `rounds` rounds every belief equals the optimum of the
/// depth `rounds − 1` computation tree at every integral root flow. Runs on
/// the degree-preprocessed network, where every node has at least two arcs.
/// Returns the number of values compared.
pub fn tree_identity(network: &FlowNetwork, rounds: u64) -> Result<usize, String> {
    let reduced = preprocess_degree(network).map_err(err)?.network;
    let network = &reduced;
    let engine = Engine::new(network, EngineOptions::default()).map_err(err)?;
    let mut state = engine.init();
    while state.round < rounds {
        state = engine.update_round(&state).map_err(err)?;
    }
    let mut checked = 0;
    for a in network.arcs() {
        let belief = engine.belief(&state, a.id).map_err(err)?;
        let tree = build_tree(network, a.id, rounds as usize - 1, DEFAULT_TREE_BUDGET).map_err(err)?;
        let u = a.capacity.finite().ok_or("tree identity needs finite capacities")?;
        for z in 0..=u {
            let from_tree = tree_solve(&tree, RootFlow::Fixed(z)).ok().map(|s| s.value);
            let from_bp = belief.evaluate(&Int::from(z));
            if from_tree != from_bp {
                return Err(format!("arc {} round {rounds} z={z}: belief {from_bp:?}, tree {from_tree:?}", a.id));
            }
            checked += 1;
        }
    }
    Ok(checked)
}

fn pwl_grid(count: usize, seed: u64) -> Result<usize, String> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut checked = 0;
    for i in 0..count {
        if i % 2 == 0 {
            let (f, g) = (random_raw(&mut rng), random_raw(&mut rng));
            let h = to_pwl(&f).inf_convolve(&to_pwl(&g)).map_err(err)?;
            checked += compare_on_grid(&h, &[f, g], &[Sign::Plus, Sign::Plus], 8)?;
        } else {
            let raws: Vec<_> = (0..3).map(|_| random_raw(&mut rng)).collect();
            let signs: Vec<Sign> = (0..3).map(|_| if rng.gen_bool(0.5) { Sign::Plus } else { Sign::Minus }).collect();
            let fs: Vec<PwlConvex> = raws.iter().map(to_pwl).collect();
            let h = PwlConvex::scaled_interpolation(&fs, &signs).map_err(err)?;
            checked += compare_on_grid(&h, &raws, &signs, 2)?;
        }
    }
    Ok(checked)
}

fn triangle() -> Result<usize, String> {
    use crate::flowmodel::{Arc, Capacity, Node, NodeId};
    let net = FlowNetwork::new(
        vec![Node { id: NodeId(1), demand: 1 }, Node { id: NodeId(2), demand: 0 }, Node { id: NodeId(3), demand: -1 }],
        vec![
            Arc::linear(1, 1, 2, Capacity::Finite(2), 1),
            Arc::linear(2, 2, 3, Capacity::Finite(2), 1),
            Arc::linear(3, 1, 3, Capacity::Finite(2), 3),
        ],
    )
    .map_err(err)?;
    let exact = exact_solve(&net).map_err(err)?;
    let bp = run(&net, RunOptions::default()).map_err(err)?;
    if bp.assignment.as_vec(&net) != [1, 1, 0] || exact.objective != Int::from(2) {
        return Err(format!("expected flow (1,1,0) of cost 2, got {:?}", bp.assignment.as_vec(&net)));
    }
    if !detect_uniqueness(&net, UniquenessOptions::default()).map_err(err)?.unique {
        return Err("unique optimum not detected".into());
    }
    let tied = net.with_linear_costs(&[(ArcId(3), Int::from(2))].into()).map_err(err)?;
    if detect_uniqueness(&tied, UniquenessOptions::default()).map_err(err)?.unique {
        return Err("tied instance reported unique".into());
    }
    Ok(4)
}

fn oscillation(ds: &[i64]) -> Result<usize, String> {
    let mut settle = Vec::new();
    for &d in ds {
        settle.push(settle_round(&oscillating_triangle(d), ArcId(1)).map_err(err)? as f64);
    }
    let xs: Vec<f64> = ds.iter().map(|&d| d as f64).collect();
    let slope = least_squares_slope(&xs, &settle);
    if slope < 0.2 {
        return Err(format!("settle rounds {settle:?} grow with slope {slope:.3} < 0.2"));
    }
    Ok(ds.len())
}

fn small_instance(seed: u64, optimum: Optimum) -> Result<FlowNetwork, String> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let n = rng.gen_range(3..=5);
    let m = rng.gen_range(n..=n + 3);
    let c_max = if optimum == Optimum::Multiple { 2 } else { 6 };
    generate(&GenParams { optimum, ..GenParams::new(n, m, c_max, 3, seed) }).map_err(err)
}

/// A small instance that keeps arcs after degree preprocessing.
fn cyclic_instance(seed: u64) -> Result<FlowNetwork, String> {
    (0..)
        .map(|k| small_instance(seed * 1000 + k, Optimum::Any))
        .find(|net| net.as_ref().map_or(true, |n| preprocess_degree(n).map_or(true, |p| p.network.arc_count() > 0)))
        .expect("unbounded search")
}

fn bp_vs_exact(count: u64, seed: u64) -> Result<usize, String> {
    for i in 0..count {
        let net = small_instance(seed + i, Optimum::Unique)?;
        let exact = exact_solve(&net).map_err(err)?;
        let bp = run(&net, RunOptions::default()).map_err(err)?;
        if bp.assignment.flows != exact.flows {
            return Err(format!("instance {i}: message passing {:?} vs exact {:?}", bp.assignment.flows, exact.flows));
        }
    }
    Ok(count as usize)
}

fn tree_batch(count: u64, seed: u64) -> Result<usize, String> {
    let mut checked = 0;
    for i in 0..count {
        let net = cyclic_instance(seed + i)?;
        for rounds in 1..=3 {
            checked += tree_identity(&net, rounds)?;
        }
    }
    Ok(checked)
}

fn uniqueness_batch(count: u64, seed: u64) -> Result<usize, String> {
    for i in 0..count {
        for optimum in [Optimum::Unique, Optimum::Multiple] {
            let net = small_instance(seed + i, optimum)?;
            let report = detect_uniqueness(&net, UniquenessOptions::default()).map_err(err)?;
            if report.unique != (optimum == Optimum::Unique) {
                return Err(format!("instance {i}: uniqueness {} but oracle says {optimum:?}", report.unique));
            }
        }
    }
    Ok(2 * count as usize)
}

fn approx_batch(count: u64, seed: u64) -> Result<usize, String> {
    let eps = BigRational::new(1.into(), 2.into());
    for i in 0..count {
        let net = generate(&GenParams::new(3, 4, 4, 2, seed + i)).map_err(err)?;
        let opt = exact_solve(&net).map_err(err)?.objective;
        let got = approx_scheme(&net, &eps, seed + i, FprasOptions::default()).map_err(err)?.assignment.objective;
        // got ≤ (1 + 1/2)·opt
        if &got * &Int::from(2) > &opt * &Int::from(3) {
            return Err(format!("instance {i}: objective {got} exceeds 1.5·{opt}"));
        }
    }
    Ok(count as usize)
}
