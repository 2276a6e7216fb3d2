//! t-SNE projection to two dimensions: exact gradients for small inputs,
//! Barnes–Hut approximation above [`EXACT_LIMIT`] points.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const EXACT_LIMIT: usize = 2000;
/// Below this many points the projection falls back to PCA.
pub const MIN_TSNE_POINTS: usize = 5;

const EARLY_EXAGGERATION: f64 = 12.0;
const EXAGGERATION_ITERS: usize = 250;
const LEARNING_RATE: f64 = 200.0;
const PERPLEXITY_TOL: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub theta: f64,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        TsneConfig {
            perplexity: 30.0,
            iterations: 1000,
            theta: 0.5,
            seed: 0,
        }
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Conditional probabilities of one point over `d2` (squared distances to
/// its candidate neighbours), calibrated to `perplexity` by bisection.
fn conditional_row(d2: &[f64], perplexity: f64) -> Vec<f64> {
    let target = perplexity.ln();
    let (mut beta, mut lo, mut hi) = (1.0f64, f64::NEG_INFINITY, f64::INFINITY);
    let dmin = d2.iter().copied().fold(f64::INFINITY, f64::min);
    let mut p = vec![0.0; d2.len()];
    for _ in 0..200 {
        let mut sum = 0.0;
        for (pj, &d) in p.iter_mut().zip(d2) {
            *pj = (-(d - dmin) * beta).exp();
            sum += *pj;
        }
        let mut h = 0.0;
        for (pj, &d) in p.iter_mut().zip(d2) {
            *pj /= sum;
            h += beta * (d - dmin) * *pj;
        }
        // entropy of the normalized row: ln(sum) + beta * E[d - dmin]
        let h = h + sum.ln();
        let diff = h - target;
        if diff.abs() < PERPLEXITY_TOL {
            break;
        }
        if diff > 0.0 {
            lo = beta;
            beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
        } else {
            hi = beta;
            beta = if lo.is_finite() { (beta + lo) / 2.0 } else { beta / 2.0 };
        }
    }
    p
}

/// Symmetric joint probabilities as sparse rows `(j, p_ij)`.
fn joint_probabilities(data: &[f64], dims: usize, n: usize, perplexity: f64, exact: bool) -> Vec<Vec<(usize, f64)>> {
    let row = |i: usize| &data[i * dims..(i + 1) * dims];
    let k = if exact { n - 1 } else { ((3.0 * perplexity) as usize).min(n - 1) };
    let cond: Vec<Vec<(usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut cand: Vec<(usize, f64)> = (0..n).filter(|&j| j != i).map(|j| (j, sq_dist(row(i), row(j)))).collect();
            if !exact {
                cand.select_nth_unstable_by(k - 1, |a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
                cand.truncate(k);
                cand.sort_by_key(|c| c.0);
            }
            let d2: Vec<f64> = cand.iter().map(|c| c.1).collect();
            let p = conditional_row(&d2, perplexity);
            cand.iter().map(|c| c.0).zip(p).collect()
        })
        .collect();
    let mut sym: Vec<std::collections::BTreeMap<usize, f64>> = vec![Default::default(); n];
    for (i, r) in cond.iter().enumerate() {
        for &(j, p) in r {
            *sym[i].entry(j).or_default() += p;
            *sym[j].entry(i).or_default() += p;
        }
    }
    let z = 2.0 * n as f64;
    sym.into_iter()
        .map(|m| m.into_iter().map(|(j, p)| (j, (p / z).max(1e-12))).collect())
        .collect()
}

/// Projects `n = data.len() / dims` points to 2-D.
pub fn project(data: &[f64], dims: usize, cfg: &TsneConfig) -> Result<Vec<[f64; 2]>> {
    if dims == 0 || data.len() % dims != 0 {
        return Err(Error::invalid("data length is not a multiple of dims"));
    }
    let n = data.len() / dims;
    if n == 0 {
        return Ok(Vec::new());
    }
    if n < MIN_TSNE_POINTS {
        return Ok(pca_2d(data, dims));
    }
    if data.chunks_exact(dims).all(|r| r == &data[..dims]) {
        // no structure to preserve: every point maps to the origin
        return Ok(vec![[0.0; 2]; n]);
    }
    let perplexity = cfg.perplexity.min((n - 1) as f64 / 3.0).max(1.0);
    let exact = n <= EXACT_LIMIT;
    let p = joint_probabilities(data, dims, n, perplexity, exact);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let normal = Normal::new(0.0, 1e-4).expect("valid normal");
    let mut y: Vec<[f64; 2]> = (0..n).map(|_| [normal.sample(&mut rng), normal.sample(&mut rng)]).collect();
    let mut velocity = vec![[0.0; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    let mut grad = vec![[0.0; 2]; n];

    for iter in 0..cfg.iterations {
        let exaggeration = if iter < EXAGGERATION_ITERS { EARLY_EXAGGERATION } else { 1.0 };
        let momentum = if iter < EXAGGERATION_ITERS { 0.5 } else { 0.8 };
        if exact {
            exact_gradient(&y, &p, exaggeration, &mut grad);
        } else {
            bh_gradient(&y, &p, exaggeration, cfg.theta, &mut grad);
        }
        for i in 0..n {
            for c in 0..2 {
                let g = grad[i][c];
                gains[i][c] = if (g > 0.0) != (velocity[i][c] > 0.0) {
                    gains[i][c] + 0.2
                } else {
                    (gains[i][c] * 0.8).max(0.01)
                };
                velocity[i][c] = momentum * velocity[i][c] - LEARNING_RATE * gains[i][c] * g;
                y[i][c] += velocity[i][c];
            }
        }
        let mean = [y.iter().map(|p| p[0]).sum::<f64>() / n as f64, y.iter().map(|p| p[1]).sum::<f64>() / n as f64];
        for p in y.iter_mut() {
            p[0] -= mean[0];
            p[1] -= mean[1];
        }
    }
    if y.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
        return Err(Error::Diverged {
            epoch: cfg.iterations,
            loss: f64::NAN,
        });
    }
    Ok(y)
}

fn exact_gradient(y: &[[f64; 2]], p: &[Vec<(usize, f64)>], exaggeration: f64, grad: &mut [[f64; 2]]) {
    let n = y.len();
    let rows: Vec<([f64; 2], f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rep = [0.0; 2];
            let mut z = 0.0;
            for j in 0..n {
                if j == i {
                    continue;
                }
                let dx = y[i][0] - y[j][0];
                let dy = y[i][1] - y[j][1];
                let q = 1.0 / (1.0 + dx * dx + dy * dy);
                z += q;
                rep[0] += q * q * dx;
                rep[1] += q * q * dy;
            }
            (rep, z)
        })
        .collect();
    let z: f64 = rows.iter().map(|r| r.1).sum();
    apply_forces(y, p, exaggeration, &rows, z, grad);
}

fn apply_forces(y: &[[f64; 2]], p: &[Vec<(usize, f64)>], exaggeration: f64, rep: &[([f64; 2], f64)], z: f64, grad: &mut [[f64; 2]]) {
    for (i, g) in grad.iter_mut().enumerate() {
        let mut attr = [0.0; 2];
        for &(j, pij) in &p[i] {
            let dx = y[i][0] - y[j][0];
            let dy = y[i][1] - y[j][1];
            let q = 1.0 / (1.0 + dx * dx + dy * dy);
            attr[0] += exaggeration * pij * q * dx;
            attr[1] += exaggeration * pij * q * dy;
        }
        g[0] = 4.0 * (attr[0] - rep[i].0[0] / z);
        g[1] = 4.0 * (attr[1] - rep[i].0[1] / z);
    }
}

const MAX_DEPTH: usize = 48;

#[derive(Debug, Clone)]
struct Cell {
    cx: f64,
    cy: f64,
    half: f64,
    mass: f64,
    com: [f64; 2],
    children: Option<[usize; 4]>,
    points: Vec<usize>,
}

struct QuadTree {
    cells: Vec<Cell>,
}

impl QuadTree {
    fn build(y: &[[f64; 2]]) -> QuadTree {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in y {
            for c in 0..2 {
                lo[c] = lo[c].min(p[c]);
                hi[c] = hi[c].max(p[c]);
            }
        }
        let half = ((hi[0] - lo[0]).max(hi[1] - lo[1]) / 2.0).max(1e-9) * 1.0001;
        let mut t = QuadTree {
            cells: vec![Cell::new((lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0, half)],
        };
        for (i, p) in y.iter().enumerate() {
            t.insert(0, i, *p, y, 0);
        }
        t
    }

    fn insert(&mut self, node: usize, i: usize, p: [f64; 2], y: &[[f64; 2]], depth: usize) {
        let cell = &mut self.cells[node];
        let m = cell.mass;
        cell.com = [(cell.com[0] * m + p[0]) / (m + 1.0), (cell.com[1] * m + p[1]) / (m + 1.0)];
        cell.mass += 1.0;
        if cell.children.is_none() {
            if cell.points.is_empty() || depth >= MAX_DEPTH {
                cell.points.push(i);
                return;
            }
            let old = std::mem::take(&mut cell.points);
            let (cx, cy, h) = (cell.cx, cell.cy, cell.half / 2.0);
            let base = self.cells.len();
            for (dx, dy) in [(-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0), (1.0, 1.0)] {
                self.cells.push(Cell::new(cx + dx * h, cy + dy * h, h));
            }
            self.cells[node].children = Some([base, base + 1, base + 2, base + 3]);
            for o in old {
                let child = self.child_for(node, y[o]);
                self.insert(child, o, y[o], y, depth + 1);
            }
        }
        let child = self.child_for(node, p);
        self.insert(child, i, p, y, depth + 1);
    }

    fn child_for(&self, node: usize, p: [f64; 2]) -> usize {
        let c = &self.cells[node];
        let ch = c.children.expect("internal cell");
        let idx = (p[0] >= c.cx) as usize + 2 * (p[1] >= c.cy) as usize;
        ch[idx]
    }

    /// Repulsive force numerator and normalization contribution for point `i`.
    fn repulsion(&self, node: usize, i: usize, p: [f64; 2], theta: f64, acc: &mut ([f64; 2], f64)) {
        let c = &self.cells[node];
        if c.mass == 0.0 {
            return;
        }
        let dx = p[0] - c.com[0];
        let dy = p[1] - c.com[1];
        let d2 = dx * dx + dy * dy;
        let leaf = c.children.is_none();
        if leaf || (2.0 * c.half) / d2.sqrt() < theta {
            let mass = if leaf && c.points.contains(&i) { c.mass - 1.0 } else { c.mass };
            if mass <= 0.0 {
                return;
            }
            let q = 1.0 / (1.0 + d2);
            acc.1 += mass * q;
            acc.0[0] += mass * q * q * dx;
            acc.0[1] += mass * q * q * dy;
            return;
        }
        for &ch in c.children.as_ref().expect("internal cell") {
            self.repulsion(ch, i, p, theta, acc);
        }
    }
}

impl Cell {
    fn new(cx: f64, cy: f64, half: f64) -> Cell {
        Cell {
            cx,
            cy,
            half,
            mass: 0.0,
            com: [0.0; 2],
            children: None,
            points: Vec::new(),
        }
    }
}

fn bh_gradient(y: &[[f64; 2]], p: &[Vec<(usize, f64)>], exaggeration: f64, theta: f64, grad: &mut [[f64; 2]]) {
    let tree = QuadTree::build(y);
    let rows: Vec<([f64; 2], f64)> = (0..y.len())
        .into_par_iter()
        .map(|i| {
            let mut acc = ([0.0; 2], 0.0);
            tree.repulsion(0, i, y[i], theta, &mut acc);
            acc
        })
        .collect();
    let z: f64 = rows.iter().map(|r| r.1).sum();
    apply_forces(y, p, exaggeration, &rows, z.max(f64::MIN_POSITIVE), grad);
}

/// First two principal coordinates; missing directions are zero.
pub fn pca_2d(data: &[f64], dims: usize) -> Vec<[f64; 2]> {
    let n = data.len() / dims;
    if n == 0 {
        return Vec::new();
    }
    let m = DMatrix::from_row_slice(n, dims, data);
    let mean = m.row_mean();
    let centered = DMatrix::from_fn(n, dims, |i, j| m[(i, j)] - mean[j]);
    let svd = centered.clone().svd(false, true);
    let Some(v_t) = svd.v_t else {
        return vec![[0.0; 2]; n];
    };
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let mut out = vec![[0.0; 2]; n];
    for (c, &k) in order.iter().take(2).enumerate() {
        if svd.singular_values[k] <= 1e-12 {
            continue;
        }
        let mut dir: Vec<f64> = v_t.row(k).iter().copied().collect();
        // sign convention: largest-magnitude component positive
        let lead = dir.iter().copied().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
        if lead < 0.0 {
            dir.iter_mut().for_each(|x| *x = -*x);
        }
        for (i, o) in out.iter_mut().enumerate() {
            o[c] = (0..dims).map(|j| centered[(i, j)] * dir[j]).sum();
        }
    }
    out
}
