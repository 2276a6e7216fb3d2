//! Input generators shared by the benches.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roleseer_core::metrics::Topology;

/// Erdős–Rényi graph with `n` nodes and edge probability `p`.
pub fn random_topology(n: usize, p: f64, seed: u64) -> Topology {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(p) {
                edges.push((i, j));
            }
        }
    }
    Topology::from_edges(n, &edges)
}

/// `groups` gaussian blobs in `dims` dimensions, row-major.
pub fn blobs(per_group: usize, groups: usize, dims: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(per_group * groups * dims);
    for g in 0..groups {
        for _ in 0..per_group {
            for d in 0..dims {
                let center = if d % groups == g { 8.0 } else { 0.0 };
                out.push(center + rng.random_range(-1.0..1.0));
            }
        }
    }
    out
}
