use std::collections::BTreeMap;

use log::warn;

use super::Topology;
use crate::ingest::{PlayerId, TimestampGraph};

#[derive(Debug, Clone, Copy)]
pub struct PageRankConfig {
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PageRankConfig {
    fn default() -> Self {
        PageRankConfig {
            damping: 0.85,
            tol: 1e-9,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PageRank<S> {
    pub scores: S,
    pub converged: bool,
    pub iterations: usize,
}

/// Power iteration; mass on isolated nodes is spread uniformly.
pub fn pagerank_scores(topo: &Topology, cfg: &PageRankConfig) -> PageRank<Vec<f64>> {
    let n = topo.len();
    if n == 0 {
        return PageRank { scores: Vec::new(), converged: true, iterations: 0 };
    }
    let nf = n as f64;
    let mut x = vec![1.0 / nf; n];
    let mut next = vec![0.0; n];
    for it in 1..=cfg.max_iter {
        let dangling: f64 = (0..n).filter(|&v| topo.degree(v) == 0).map(|v| x[v]).sum();
        let base = (1.0 - cfg.damping) / nf + cfg.damping * dangling / nf;
        for v in 0..n {
            let inflow: f64 = topo.adj[v].iter().map(|&u| x[u] / topo.degree(u) as f64).sum();
            next[v] = base + cfg.damping * inflow;
        }
        let diff: f64 = x.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut x, &mut next);
        if diff < cfg.tol {
            return PageRank { scores: x, converged: true, iterations: it };
        }
    }
    warn!("pagerank did not converge in {} iterations", cfg.max_iter);
    PageRank { scores: x, converged: false, iterations: cfg.max_iter }
}

pub fn pagerank(g: &TimestampGraph, cfg: &PageRankConfig) -> PageRank<BTreeMap<PlayerId, f64>> {
    let topo = Topology::from_graph(g);
    let pr = pagerank_scores(&topo, cfg);
    PageRank {
        scores: topo.to_map(pr.scores),
        converged: pr.converged,
        iterations: pr.iterations,
    }
}
