use std::collections::{BTreeMap, VecDeque};

use rayon::prelude::*;

use super::Topology;
use crate::ingest::{PlayerId, TimestampGraph};

/// Hop distances from `src`; `usize::MAX` marks unreachable nodes.
pub fn bfs_distances(topo: &Topology, src: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; topo.len()];
    let mut queue = VecDeque::new();
    dist[src] = 0;
    queue.push_back(src);
    while let Some(v) = queue.pop_front() {
        for &w in &topo.adj[v] {
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
        }
    }
    dist
}

/// Brandes dependency accumulation from a single source.
fn dependencies_from(topo: &Topology, s: usize) -> Vec<f64> {
    let n = topo.len();
    let mut order = Vec::with_capacity(n);
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut sigma = vec![0.0f64; n];
    let mut dist = vec![usize::MAX; n];
    sigma[s] = 1.0;
    dist[s] = 0;
    let mut queue = VecDeque::from([s]);
    while let Some(v) = queue.pop_front() {
        order.push(v);
        for &w in &topo.adj[v] {
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
            if dist[w] == dist[v] + 1 {
                sigma[w] += sigma[v];
                preds[w].push(v);
            }
        }
    }
    let mut delta = vec![0.0f64; n];
    for &w in order.iter().rev() {
        for &v in &preds[w] {
            delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
        }
    }
    delta[s] = 0.0;
    delta
}

/// Unnormalized betweenness, each unordered pair counted once.
pub fn betweenness_scores(topo: &Topology) -> Vec<f64> {
    let n = topo.len();
    let partials: Vec<Vec<f64>> = (0..n).into_par_iter().map(|s| dependencies_from(topo, s)).collect();
    let mut total = vec![0.0; n];
    for p in partials {
        for (t, d) in total.iter_mut().zip(p) {
            *t += d;
        }
    }
    total.iter_mut().for_each(|t| *t /= 2.0);
    total
}

pub fn betweenness(g: &TimestampGraph) -> BTreeMap<PlayerId, f64> {
    let topo = Topology::from_graph(g);
    let b = betweenness_scores(&topo);
    topo.to_map(b)
}

/// Component-aware closeness: `(r-1)/sum(dist) * (r-1)/(n-1)` where `r` is
/// the number of nodes reachable from `v` (including itself).
pub fn closeness_scores(topo: &Topology) -> Vec<f64> {
    let n = topo.len();
    (0..n)
        .into_par_iter()
        .map(|v| {
            let dist = bfs_distances(topo, v);
            let (reach, total) = dist
                .iter()
                .filter(|&&d| d != usize::MAX)
                .fold((0usize, 0usize), |(r, t), &d| (r + 1, t + d));
            if reach <= 1 || n <= 1 {
                return 0.0;
            }
            let r1 = (reach - 1) as f64;
            r1 / total as f64 * r1 / (n - 1) as f64
        })
        .collect()
}

pub fn closeness(g: &TimestampGraph) -> BTreeMap<PlayerId, f64> {
    let topo = Topology::from_graph(g);
    let c = closeness_scores(&topo);
    topo.to_map(c)
}
