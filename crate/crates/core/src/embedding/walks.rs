use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::context::ContextGraph;
use crate::metrics::Topology;
use crate::seed::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkConfig {
    pub walks_per_node: usize,
    pub walk_length: usize,
    /// Probability of attempting a layer change instead of a within-layer step.
    pub layer_jump_prob: f64,
    pub seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig {
            walks_per_node: 10,
            walk_length: 80,
            layer_jump_prob: 0.3,
            seed: 0,
        }
    }
}

/// Walks over node indices of one graph.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WalkCorpus {
    pub vocab_size: usize,
    pub walks: Vec<Vec<u32>>,
}

impl WalkCorpus {
    pub fn token_count(&self) -> usize {
        self.walks.iter().map(Vec::len).sum()
    }

    pub fn frequencies(&self) -> Vec<u64> {
        let mut f = vec![0u64; self.vocab_size];
        for w in &self.walks {
            for &t in w {
                f[t as usize] += 1;
            }
        }
        f
    }
}

fn walk_rng(seed: u64, round: usize, node: usize, n: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, (round * n + node) as u64))
}

/// Biased walks over the multilayer context graph. Each walk starts at layer
/// 0; only within-layer moves emit tokens.
pub fn generate_walks(ctx: &ContextGraph, cfg: &WalkConfig) -> WalkCorpus {
    let n = ctx.node_count;
    if n == 0 || cfg.walk_length == 0 {
        return WalkCorpus { vocab_size: n, walks: Vec::new() };
    }
    let walks = (0..cfg.walks_per_node)
        .flat_map(|round| (0..n).map(move |node| (round, node)))
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(round, node)| {
            let mut rng = walk_rng(cfg.seed, round, node, n);
            structural_walk(ctx, node, cfg, &mut rng)
        })
        .collect();
    WalkCorpus { vocab_size: n, walks }
}

fn structural_walk<R: Rng>(ctx: &ContextGraph, start: usize, cfg: &WalkConfig, rng: &mut R) -> Vec<u32> {
    let mut walk = Vec::with_capacity(cfg.walk_length);
    walk.push(start as u32);
    if ctx.layers.is_empty() || !ctx.layers[0].has_neighbours(start) {
        walk.resize(cfg.walk_length, start as u32);
        return walk;
    }
    let (mut u, mut k) = (start, 0usize);
    while walk.len() < cfg.walk_length {
        let layer = &ctx.layers[k];
        if layer.has_neighbours(u) && rng.random::<f64>() >= cfg.layer_jump_prob {
            if let Some(v) = layer.sample_neighbour(u, rng) {
                u = v;
                walk.push(u as u32);
            }
            continue;
        }
        let up_ok = ctx.can_go_up(u, k);
        let down_ok = k > 0;
        k = match (up_ok, down_ok) {
            (true, true) => {
                if rng.random::<f64>() < ctx.up_probability(u, k) {
                    k + 1
                } else {
                    k - 1
                }
            }
            (true, false) => k + 1,
            (false, true) => k - 1,
            (false, false) => k,
        };
    }
    walk
}

/// Uniform random walks on the raw graph, for the proximity baseline.
pub fn deepwalk_walks(topo: &Topology, cfg: &WalkConfig) -> WalkCorpus {
    let n = topo.len();
    if n == 0 || cfg.walk_length == 0 {
        return WalkCorpus { vocab_size: n, walks: Vec::new() };
    }
    let walks = (0..cfg.walks_per_node)
        .flat_map(|round| (0..n).map(move |node| (round, node)))
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(round, node)| {
            let mut rng = walk_rng(cfg.seed, round, node, n);
            let mut walk = Vec::with_capacity(cfg.walk_length);
            let mut u = node;
            walk.push(u as u32);
            while walk.len() < cfg.walk_length {
                let nbrs = &topo.adj[u];
                if !nbrs.is_empty() {
                    u = nbrs[rng.random_range(0..nbrs.len())];
                }
                walk.push(u as u32);
            }
            walk
        })
        .collect();
    WalkCorpus { vocab_size: n, walks }
}
