use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Topology;
use crate::ingest::{PlayerId, TimestampGraph};

const MAX_ROUNDS: usize = 100;

/// Asynchronous label propagation. Nodes are visited in a seeded random
/// order each round; a node keeps its label when it is among the most
/// frequent neighbour labels, otherwise it takes the smallest of them.
pub fn label_propagation(topo: &Topology, seed: u64) -> Vec<usize> {
    let n = topo.len();
    let mut labels: Vec<usize> = (0..n).collect();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for _ in 0..MAX_ROUNDS {
        order.shuffle(&mut rng);
        let mut changed = false;
        for &v in &order {
            if topo.adj[v].is_empty() {
                continue;
            }
            counts.clear();
            for &u in &topo.adj[v] {
                *counts.entry(labels[u]).or_insert(0) += 1;
            }
            let best = counts.values().copied().max().unwrap_or(0);
            if counts.get(&labels[v]) == Some(&best) {
                continue;
            }
            let pick = counts.iter().find(|(_, &c)| c == best).map(|(&l, _)| l).unwrap();
            labels[v] = pick;
            changed = true;
        }
        if !changed {
            break;
        }
    }
    labels
}

/// Z-score of each node's within-community degree against its community,
/// given an explicit community assignment. Zero-variance communities and
/// singletons score 0.
pub fn within_module_degree_for(topo: &Topology, communities: &[usize]) -> Vec<f64> {
    let n = topo.len();
    let within: Vec<f64> = (0..n)
        .map(|v| topo.adj[v].iter().filter(|&&u| communities[u] == communities[v]).count() as f64)
        .collect();
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for v in 0..n {
        groups.entry(communities[v]).or_default().push(v);
    }
    let mut z = vec![0.0; n];
    for members in groups.values() {
        if members.len() < 2 {
            continue;
        }
        let vals: Vec<f64> = members.iter().map(|&v| within[v]).collect();
        let mean = crate::stats::mean(&vals);
        let sd = crate::stats::variance(&vals).sqrt();
        if sd <= 0.0 {
            continue;
        }
        for &v in members {
            z[v] = (within[v] - mean) / sd;
        }
    }
    z
}

pub fn within_module_degree_scores(topo: &Topology, seed: u64) -> Vec<f64> {
    let communities = label_propagation(topo, seed);
    within_module_degree_for(topo, &communities)
}

pub fn within_module_degree(g: &TimestampGraph, seed: u64) -> BTreeMap<PlayerId, f64> {
    let topo = Topology::from_graph(g);
    let z = within_module_degree_scores(&topo, seed);
    topo.to_map(z)
}
