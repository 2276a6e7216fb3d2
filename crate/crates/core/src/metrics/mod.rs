//! Per-node graph metrics computed on the unweighted topology of each
//! timestamp graph, plus the network overview summary.

mod community;
mod overview;
mod pagerank;
mod paths;

use std::collections::BTreeMap;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::ingest::{PlayerId, TimestampGraph};

pub use community::{
    label_propagation, within_module_degree, within_module_degree_for, within_module_degree_scores,
};
pub use overview::{compute_overview, OverviewStats, TimestampSummary, OVERVIEW_BINS};
pub use pagerank::{pagerank, pagerank_scores, PageRank, PageRankConfig};
pub use paths::{betweenness, betweenness_scores, bfs_distances, closeness, closeness_scores};

/// Index-based adjacency view of a graph. Node `i` is `ids[i]`; ids are in
/// ascending order so indices are stable for a given node set.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Topology {
    pub ids: Vec<PlayerId>,
    pub adj: Vec<Vec<usize>>,
}

impl Topology {
    pub fn from_graph(g: &TimestampGraph) -> Self {
        let ids: Vec<PlayerId> = g.nodes.iter().cloned().collect();
        let index: BTreeMap<&str, usize> = ids.iter().enumerate().map(|(i, p)| (p.as_str(), i)).collect();
        let mut adj = vec![Vec::new(); ids.len()];
        for (a, b) in g.edges.keys() {
            let (i, j) = (index[a.as_str()], index[b.as_str()]);
            adj[i].push(j);
            adj[j].push(i);
        }
        for nbrs in &mut adj {
            nbrs.sort_unstable();
        }
        Topology { ids, adj }
    }

    /// Numbered nodes `0..n`; used heavily by tests and benchmarks.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let ids = (0..n).map(|i| format!("n{i:04}")).collect();
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a != b && !adj[a].contains(&b) {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        for nbrs in &mut adj {
            nbrs.sort_unstable();
        }
        Topology { ids, adj }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.binary_search_by(|p| p.as_str().cmp(id)).ok()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    fn to_map(&self, values: Vec<f64>) -> BTreeMap<PlayerId, f64> {
        self.ids.iter().cloned().zip(values).collect()
    }
}

/// The six graph metrics, in reporting order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Degree,
    Pagerank,
    Betweenness,
    LeverageCentrality,
    WithinModuleDegree,
    Closeness,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::Degree,
        Metric::Pagerank,
        Metric::Betweenness,
        Metric::LeverageCentrality,
        Metric::WithinModuleDegree,
        Metric::Closeness,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Degree => "degree",
            Metric::Pagerank => "pagerank",
            Metric::Betweenness => "betweenness",
            Metric::LeverageCentrality => "leverage_centrality",
            Metric::WithinModuleDegree => "within_module_degree",
            Metric::Closeness => "closeness",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct NodeMetricRow {
    pub player: PlayerId,
    pub timestamp: usize,
    pub degree: f64,
    pub pagerank: f64,
    pub betweenness: f64,
    pub leverage_centrality: f64,
    pub within_module_degree: f64,
    pub closeness: f64,
}

impl NodeMetricRow {
    pub fn get(&self, m: Metric) -> f64 {
        match m {
            Metric::Degree => self.degree,
            Metric::Pagerank => self.pagerank,
            Metric::Betweenness => self.betweenness,
            Metric::LeverageCentrality => self.leverage_centrality,
            Metric::WithinModuleDegree => self.within_module_degree,
            Metric::Closeness => self.closeness,
        }
    }

    pub fn values(&self) -> [f64; 6] {
        Metric::ALL.map(|m| self.get(m))
    }
}

/// Edge count per node; isolated active players get 0.
pub fn degree(g: &TimestampGraph) -> BTreeMap<PlayerId, f64> {
    let topo = Topology::from_graph(g);
    let values = (0..topo.len()).map(|v| topo.degree(v) as f64).collect();
    topo.to_map(values)
}

pub fn leverage_scores(topo: &Topology) -> Vec<f64> {
    (0..topo.len())
        .map(|v| {
            let kv = topo.degree(v) as f64;
            if kv == 0.0 {
                return 0.0;
            }
            topo.adj[v]
                .iter()
                .map(|&u| {
                    let ku = topo.degree(u) as f64;
                    (kv - ku) / (kv + ku)
                })
                .sum::<f64>()
                / kv
        })
        .collect()
}

/// Mean of `(deg v - deg u) / (deg v + deg u)` over the neighbours `u` of `v`.
pub fn leverage_centrality(g: &TimestampGraph) -> BTreeMap<PlayerId, f64> {
    let topo = Topology::from_graph(g);
    topo.to_map(leverage_scores(&topo))
}

/// All six metrics for every node of one timestamp graph.
pub fn compute_node_metrics(g: &TimestampGraph, seed: u64) -> Vec<NodeMetricRow> {
    let topo = Topology::from_graph(g);
    node_metrics_for(&topo, g.index, seed)
}

pub fn node_metrics_for(topo: &Topology, timestamp: usize, seed: u64) -> Vec<NodeMetricRow> {
    let pr = pagerank_scores(topo, &PageRankConfig::default()).scores;
    let bet = betweenness_scores(topo);
    let lev = leverage_scores(topo);
    let wmd = within_module_degree_scores(topo, seed);
    let clo = closeness_scores(topo);
    (0..topo.len())
        .map(|v| NodeMetricRow {
            player: topo.ids[v].clone(),
            timestamp,
            degree: topo.degree(v) as f64,
            pagerank: pr[v],
            betweenness: bet[v],
            leverage_centrality: lev[v],
            within_module_degree: wmd[v],
            closeness: clo[v],
        })
        .collect()
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::Topology;

    pub fn star(leaves: usize) -> Topology {
        let edges: Vec<_> = (1..=leaves).map(|i| (0, i)).collect();
        Topology::from_edges(leaves + 1, &edges)
    }

    pub fn path(n: usize) -> Topology {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Topology::from_edges(n, &edges)
    }

    pub fn cycle(n: usize) -> Topology {
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Topology::from_edges(n, &edges)
    }

    pub fn clique(n: usize) -> Topology {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                edges.push((i, j));
            }
        }
        Topology::from_edges(n, &edges)
    }
}
