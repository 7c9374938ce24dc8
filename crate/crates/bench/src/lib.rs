//! Shared fixtures for the criterion benches.

use flowbp_core::generate::{generate, GenParams, Optimum};
use flowbp_core::oracles::grid::{random_raw, to_pwl};
use flowbp_core::{FlowNetwork, PwlConvex};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Seeded random convex functions with up to three pieces.
pub fn random_functions(count: usize, seed: u64) -> Vec<PwlConvex> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..count).map(|_| to_pwl(&random_raw(&mut rng))).collect()
}

/// A seeded instance with `nodes` nodes, `2·nodes` arcs and a unique optimum.
pub fn unique_instance(nodes: usize, seed: u64) -> FlowNetwork {
    let params = GenParams { optimum: Optimum::Unique, ..GenParams::new(nodes, 2 * nodes, 8, 4, seed) };
    generate(&params).expect("instance generation")
}
