//! Hop-ring degree sequences and the multi-scale structural distance
//! between node pairs.

use std::collections::VecDeque;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metrics::Topology;

/// Largest hop distance considered.
pub const MAX_LAYERS: usize = 5;

/// Above this many cells, DTW runs on run-length compressed sequences.
const DTW_EXACT_CELLS: usize = 16_384;

/// Sorted degrees of the nodes at exactly `k` hops from `v`.
pub fn ordered_degree_sequence(topo: &Topology, v: usize, k: usize) -> Vec<u32> {
    let mut r = rings(topo, v, k);
    if r.len() == k + 1 {
        r.pop().unwrap_or_default()
    } else {
        Vec::new()
    }
}

/// Degree sequences of rings `0..=k_max` around `v`; stops early at the
/// first empty ring.
pub fn rings(topo: &Topology, v: usize, k_max: usize) -> Vec<Vec<u32>> {
    let mut out = vec![vec![topo.degree(v) as u32]];
    let mut dist = vec![usize::MAX; topo.len()];
    dist[v] = 0;
    let mut frontier = vec![v];
    for k in 1..=k_max {
        let mut next = Vec::new();
        for &u in &frontier {
            for &w in &topo.adj[u] {
                if dist[w] == usize::MAX {
                    dist[w] = k;
                    next.push(w);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        let mut degs: Vec<u32> = next.iter().map(|&w| topo.degree(w) as u32).collect();
        degs.sort_unstable();
        out.push(degs);
        frontier = next;
    }
    out.truncate(k_max + 1);
    out
}

/// Ratio cost between two degrees. Zero degrees are shifted by one so that
/// isolated nodes stay comparable: `cost(0, b) = b`.
#[inline]
pub fn degree_cost(a: u32, b: u32) -> f64 {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    if lo == 0 {
        hi as f64
    } else {
        hi as f64 / lo as f64 - 1.0
    }
}

/// Dynamic time warping between two sorted degree sequences.
pub fn dtw(a: &[u32], b: &[u32]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return if a.is_empty() && b.is_empty() { 0.0 } else { f64::INFINITY };
    }
    if a.len() * b.len() > DTW_EXACT_CELLS {
        return dtw_compressed(&run_lengths(a), &run_lengths(b));
    }
    dtw_exact(a, b)
}

pub fn dtw_exact(a: &[u32], b: &[u32]) -> f64 {
    let m = b.len();
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut cur = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for &x in a {
        cur[0] = f64::INFINITY;
        for j in 1..=m {
            let best = prev[j].min(prev[j - 1]).min(cur[j - 1]);
            cur[j] = degree_cost(x, b[j - 1]) + best;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[m]
}

fn run_lengths(seq: &[u32]) -> Vec<(u32, u32)> {
    let mut out: Vec<(u32, u32)> = Vec::new();
    for &d in seq {
        match out.last_mut() {
            Some((deg, count)) if *deg == d => *count += 1,
            _ => out.push((d, 1)),
        }
    }
    out
}

/// DTW over `(degree, count)` runs, each match weighted by the larger count.
fn dtw_compressed(a: &[(u32, u32)], b: &[(u32, u32)]) -> f64 {
    let m = b.len();
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut cur = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for &(x, cx) in a {
        cur[0] = f64::INFINITY;
        for j in 1..=m {
            let (y, cy) = b[j - 1];
            let best = prev[j].min(prev[j - 1]).min(cur[j - 1]);
            cur[j] = degree_cost(x, y) * cx.max(cy) as f64 + best;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[m]
}

/// `f_k(u, v)` for `k = 0..` up to the last layer where both rings exist.
pub fn structural_distance(topo: &Topology, u: usize, v: usize, k_max: usize) -> Result<Vec<f64>> {
    if u >= topo.len() || v >= topo.len() {
        return Err(Error::invalid(format!("node index out of range ({u}, {v}) for {} nodes", topo.len())));
    }
    Ok(cumulative_distance(&rings(topo, u, k_max), &rings(topo, v, k_max)))
}

fn cumulative_distance(ru: &[Vec<u32>], rv: &[Vec<u32>]) -> Vec<f64> {
    let mut acc = 0.0;
    ru.iter()
        .zip(rv)
        .map(|(a, b)| {
            acc += dtw(a, b);
            acc
        })
        .collect()
}

/// Largest layer index worth computing: the graph's diameter capped at
/// [`MAX_LAYERS`].
pub fn layer_limit(topo: &Topology) -> usize {
    (0..topo.len())
        .into_par_iter()
        .map(|v| bounded_eccentricity(topo, v, MAX_LAYERS))
        .max()
        .unwrap_or(0)
}

fn bounded_eccentricity(topo: &Topology, v: usize, cap: usize) -> usize {
    let mut dist = vec![usize::MAX; topo.len()];
    let mut queue = VecDeque::from([v]);
    dist[v] = 0;
    let mut ecc = 0;
    while let Some(u) = queue.pop_front() {
        if dist[u] == cap {
            return cap;
        }
        for &w in &topo.adj[u] {
            if dist[w] == usize::MAX {
                dist[w] = dist[u] + 1;
                ecc = ecc.max(dist[w]);
                queue.push_back(w);
            }
        }
    }
    ecc
}

/// How candidate pairs are chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairSelection {
    /// Graphs with at most this many nodes compare every pair.
    pub exact_node_limit: usize,
    pub seed: u64,
}

impl Default for PairSelection {
    fn default() -> Self {
        PairSelection {
            exact_node_limit: 2_000,
            seed: 0,
        }
    }
}

/// Pairwise structural distances, stored per layer as `(u, v, f_k)` with `u < v`.
#[derive(Debug, Clone, Default)]
pub struct StructuralDistances {
    pub node_count: usize,
    pub k_max: usize,
    pub layers: Vec<Vec<(u32, u32, f64)>>,
}

pub fn all_structural_distances(topo: &Topology, selection: &PairSelection) -> StructuralDistances {
    let n = topo.len();
    let k_max = layer_limit(topo);
    let rings: Vec<Vec<Vec<u32>>> = (0..n).into_par_iter().map(|v| rings(topo, v, k_max)).collect();
    let partners = candidate_pairs(topo, selection);

    let per_node: Vec<Vec<(u32, Vec<f64>)>> = partners
        .par_iter()
        .enumerate()
        .map(|(u, vs)| vs.iter().map(|&v| (v as u32, cumulative_distance(&rings[u], &rings[v]))).collect())
        .collect();

    let mut layers: Vec<Vec<(u32, u32, f64)>> = vec![Vec::new(); k_max + 1];
    for (u, row) in per_node.into_iter().enumerate() {
        for (v, fs) in row {
            for (k, f) in fs.into_iter().enumerate() {
                layers[k].push((u as u32, v, f));
            }
        }
    }
    while layers.len() > 1 && layers.last().is_some_and(Vec::is_empty) {
        layers.pop();
    }
    StructuralDistances {
        node_count: n,
        k_max: layers.len().saturating_sub(1),
        layers,
    }
}

/// For each `u`, the partners `v > u` to compare against. Small graphs use
/// every pair; larger ones keep nodes of similar degree (ratio at most 2,
/// nearest `2 log2 n` by degree) plus `log2 n` random pivots.
fn candidate_pairs(topo: &Topology, selection: &PairSelection) -> Vec<Vec<usize>> {
    let n = topo.len();
    if n <= selection.exact_node_limit {
        return (0..n).map(|u| (u + 1..n).collect()).collect();
    }
    let log_n = (n as f64).log2().ceil() as usize;
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&v| (topo.degree(v), v));
    let mut position = vec![0usize; n];
    for (i, &v) in by_degree.iter().enumerate() {
        position[v] = i;
    }
    let mut sets: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut rng = ChaCha8Rng::seed_from_u64(selection.seed);
    for u in 0..n {
        let du = topo.degree(u).max(1) as f64;
        let pos = position[u];
        let lo = pos.saturating_sub(log_n);
        let hi = (pos + log_n + 1).min(n);
        for &v in &by_degree[lo..hi] {
            let dv = topo.degree(v).max(1) as f64;
            if v != u && du.max(dv) / du.min(dv) <= 2.0 {
                let (a, b) = if u < v { (u, v) } else { (v, u) };
                sets[a].push(b);
            }
        }
        for v in sample(&mut rng, n, log_n.min(n)).into_iter() {
            if v != u {
                let (a, b) = if u < v { (u, v) } else { (v, u) };
                sets[a].push(b);
            }
        }
    }
    for s in &mut sets {
        s.sort_unstable();
        s.dedup();
    }
    sets
}
