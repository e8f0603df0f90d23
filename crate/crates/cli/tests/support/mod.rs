#![allow(dead_code)]

#[path = "../../../core/tests/common/mod.rs"]
mod common;

pub mod faults;
pub mod oracles;

#[allow(unused_imports)]
pub use common::{restaurant, template_rows};

use procgraph_core::testgen::{random_graph, GenConfig};
use procgraph_core::ProceduralGraph;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n` random valid graphs of at most `max_nodes` nodes.
pub fn graphs(seed: u64, n: usize, max_nodes: usize) -> Vec<ProceduralGraph> {
    graphs_with(
        seed,
        n,
        &GenConfig {
            max_nodes,
            ..GenConfig::default()
        },
    )
}

pub fn graphs_with(seed: u64, n: usize, cfg: &GenConfig) -> Vec<ProceduralGraph> {
    let mut r = rng(seed);
    (0..n).map(|_| random_graph(&mut r, cfg)).collect()
}
