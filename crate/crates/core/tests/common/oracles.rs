//! Brute-force reference implementations, written from the formulas and
//! sharing no code with the engine.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Simple undirected graph as an edge list over `0..n`.
#[derive(Debug, Clone)]
pub struct Graph {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
}

impl Graph {
    pub fn random(seed: u64, max_n: usize) -> Graph {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(1..=max_n);
        let p: f64 = rng.random_range(0.05..0.8);
        let mut edges = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                if rng.random_bool(p) {
                    edges.push((a, b));
                }
            }
        }
        Graph { n, edges }
    }

    pub fn connected(&self, a: usize, b: usize) -> bool {
        self.edges.iter().any(|&(x, y)| (x, y) == (a, b) || (x, y) == (b, a))
    }

    pub fn deg(&self, v: usize) -> usize {
        self.edges.iter().filter(|&&(a, b)| a == v || b == v).count()
    }
}

const INF: usize = usize::MAX / 4;

/// Floyd–Warshall hop distances.
pub fn distances(g: &Graph) -> Vec<Vec<usize>> {
    let n = g.n;
    let mut d = vec![vec![INF; n]; n];
    for v in 0..n {
        d[v][v] = 0;
    }
    for &(a, b) in &g.edges {
        d[a][b] = 1;
        d[b][a] = 1;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d
}

/// Enumerates every shortest path between each unordered pair and credits
/// interior nodes with the share of paths through them.
pub fn betweenness(g: &Graph) -> Vec<f64> {
    let d = distances(g);
    let mut out = vec![0.0; g.n];
    for s in 0..g.n {
        for t in s + 1..g.n {
            if d[s][t] >= INF {
                continue;
            }
            let mut paths: Vec<Vec<usize>> = Vec::new();
            let mut stack = vec![vec![s]];
            while let Some(path) = stack.pop() {
                let last = *path.last().unwrap();
                if last == t {
                    paths.push(path);
                    continue;
                }
                for next in 0..g.n {
                    if g.connected(last, next) && d[s][next] == d[s][last] + 1 && d[next][t] + d[s][next] == d[s][t] {
                        let mut p = path.clone();
                        p.push(next);
                        stack.push(p);
                    }
                }
            }
            let total = paths.len() as f64;
            for p in &paths {
                for &v in &p[1..p.len() - 1] {
                    out[v] += 1.0 / total;
                }
            }
        }
    }
    out
}

/// `(r-1)/sum(dist) * (r-1)/(n-1)` over the `r` nodes reachable from `v`.
pub fn closeness(g: &Graph) -> Vec<f64> {
    let d = distances(g);
    (0..g.n)
        .map(|v| {
            let reach: Vec<usize> = d[v].iter().copied().filter(|&x| x < INF).collect();
            let r = reach.len() as f64;
            let sum: usize = reach.iter().sum();
            if reach.len() <= 1 || g.n <= 1 {
                0.0
            } else {
                (r - 1.0) / sum as f64 * (r - 1.0) / (g.n as f64 - 1.0)
            }
        })
        .collect()
}

/// Solves `x = (1-d)/n + d (M x)` exactly, where isolated nodes link to all.
pub fn pagerank(g: &Graph, damping: f64) -> Vec<f64> {
    let n = g.n;
    // a = I - d M, b = (1-d)/n
    let mut a = vec![vec![0.0; n + 1]; n];
    for (i, row) in a.iter_mut().enumerate() {
        row[i] = 1.0;
        row[n] = (1.0 - damping) / n as f64;
    }
    for u in 0..n {
        let k = g.deg(u);
        for v in 0..n {
            let m = if k == 0 {
                1.0 / n as f64
            } else if g.connected(u, v) {
                1.0 / k as f64
            } else {
                0.0
            };
            a[v][u] -= damping * m;
        }
    }
    gauss(a)
}

/// Gaussian elimination with partial pivoting on an augmented matrix.
pub fn gauss(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, p);
        for r in 0..n {
            if r != c {
                let f = a[r][c] / a[c][c];
                for k in c..=n {
                    a[r][k] -= f * a[c][k];
                }
            }
        }
    }
    (0..n).map(|i| a[i][n] / a[i][i]).collect()
}

pub fn leverage(g: &Graph) -> Vec<f64> {
    (0..g.n)
        .map(|v| {
            let kv = g.deg(v) as f64;
            let terms: Vec<f64> = (0..g.n)
                .filter(|&u| g.connected(u, v))
                .map(|u| {
                    let ku = g.deg(u) as f64;
                    (kv - ku) / (kv + ku)
                })
                .collect();
            if terms.is_empty() {
                0.0
            } else {
                terms.iter().sum::<f64>() / terms.len() as f64
            }
        })
        .collect()
}

/// Z-score of intra-community degree within each community.
pub fn within_module_degree(g: &Graph, community: &[usize]) -> Vec<f64> {
    let inside: Vec<f64> = (0..g.n)
        .map(|v| (0..g.n).filter(|&u| g.connected(u, v) && community[u] == community[v]).count() as f64)
        .collect();
    (0..g.n)
        .map(|v| {
            let peers: Vec<f64> = (0..g.n).filter(|&u| community[u] == community[v]).map(|u| inside[u]).collect();
            let m = peers.iter().sum::<f64>() / peers.len() as f64;
            let sd = (peers.iter().map(|x| (x - m).powi(2)).sum::<f64>() / peers.len() as f64).sqrt();
            if peers.len() < 2 || sd == 0.0 {
                0.0
            } else {
                (inside[v] - m) / sd
            }
        })
        .collect()
}

/// Jensen–Shannon divergence in nats, straight from the definition.
pub fn js(p: &[f64], q: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..p.len() {
        let m = (p[i] + q[i]) / 2.0;
        if p[i] > 0.0 {
            s += 0.5 * p[i] * (p[i] / m).ln();
        }
        if q[i] > 0.0 {
            s += 0.5 * q[i] * (q[i] / m).ln();
        }
    }
    s
}

/// Inter-cluster divergence and intra-cluster variance of one metric,
/// evaluated term by term.
pub fn direct_scores(values: &[f64], labels: &[u32], bins: usize, eps: f64) -> (f64, f64) {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let norm: Vec<f64> = values.iter().map(|v| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 }).collect();
    let mut ids: Vec<u32> = labels.to_vec();
    ids.sort();
    ids.dedup();
    let members: Vec<Vec<f64>> = ids
        .iter()
        .map(|&c| norm.iter().zip(labels).filter(|(_, &l)| l == c).map(|(v, _)| *v).collect())
        .collect();
    let k = ids.len() as f64;

    let hist = |xs: &[f64]| -> Vec<f64> {
        let mut h = vec![0.0; bins];
        for &x in xs {
            let b = ((x * bins as f64) as usize).min(bins - 1);
            h[b] += 1.0;
        }
        let n = xs.len() as f64;
        h.iter().map(|c| (c / n + eps) / (1.0 + bins as f64 * eps)).collect()
    };
    let inter = if hi > lo && ids.len() > 1 {
        let hs: Vec<Vec<f64>> = members.iter().map(|m| hist(m)).collect();
        let mut s = 0.0;
        for p in 0..hs.len() {
            for q in 0..hs.len() {
                if p != q {
                    for i in 0..bins {
                        s += hs[p][i] * (hs[p][i] / hs[q][i]).ln();
                    }
                }
            }
        }
        s / (k * (k - 1.0))
    } else {
        0.0
    };
    let intra = members
        .iter()
        .map(|m| {
            let mean = m.iter().sum::<f64>() / m.len() as f64;
            m.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / m.len() as f64
        })
        .sum::<f64>()
        / k;
    (inter, intra)
}

/// Random labelled values: at most 4 clusters, each non-empty, at most 3 bins.
pub fn random_clustering(seed: u64) -> (Vec<f64>, Vec<u32>, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = rng.random_range(1..=4u32);
    let bins = rng.random_range(1..=3usize);
    let n = rng.random_range(k as usize..30);
    let mut labels: Vec<u32> = (0..k).collect();
    labels.extend((k as usize..n).map(|_| rng.random_range(0..k)));
    let values = (0..n)
        .map(|_| if rng.random_bool(0.2) { 1.0 } else { rng.random_range(-5.0..5.0) })
        .collect();
    (values, labels, bins)
}
