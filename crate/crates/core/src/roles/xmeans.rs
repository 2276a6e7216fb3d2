//! k-means with k-means++ seeding, and X-means model selection by BIC.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::derive_seed;

const LLOYD_ITERS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XMeansConfig {
    pub k_min: usize,
    pub k_max: usize,
    pub seed: u64,
}

impl Default for XMeansConfig {
    fn default() -> Self {
        XMeansConfig {
            k_min: 2,
            k_max: 16,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    /// Cluster index per point, `0..k`.
    pub labels: Vec<u32>,
    pub centroids: Vec<Vec<f64>>,
    /// Set when every point was identical and a single cluster was returned.
    pub degenerate: bool,
}

impl Clustering {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }
}

fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    centroids
        .iter()
        .enumerate()
        .map(|(c, m)| (c, sq(p, m)))
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
}

fn plus_plus<R: Rng>(points: &[&[f64]], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut centroids = vec![points[rng.random_range(0..points.len())].to_vec()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = points.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        } else {
            rng.random_range(0..points.len())
        };
        centroids.push(points[next].to_vec());
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq(p, &centroids[centroids.len() - 1]));
        }
    }
    centroids
}

/// Lloyd iterations from the given centroids. Empty clusters are re-seeded
/// at the point farthest from its centroid.
fn lloyd(points: &[&[f64]], mut centroids: Vec<Vec<f64>>) -> (Vec<u32>, Vec<Vec<f64>>) {
    let dims = points[0].len();
    let k = centroids.len();
    let mut labels = vec![u32::MAX; points.len()];
    for _ in 0..LLOYD_ITERS {
        let mut changed = false;
        for (l, p) in labels.iter_mut().zip(points) {
            let (c, _) = nearest(p, &centroids);
            if *l != c as u32 {
                *l = c as u32;
                changed = true;
            }
        }
        let mut sums = vec![vec![0.0; dims]; k];
        let mut counts = vec![0usize; k];
        for (l, p) in labels.iter().zip(points) {
            counts[*l as usize] += 1;
            for (s, x) in sums[*l as usize].iter_mut().zip(p.iter()) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..points.len())
                    .max_by(|&a, &b| {
                        let da = sq(points[a], &centroids[labels[a] as usize]);
                        let db = sq(points[b], &centroids[labels[b] as usize]);
                        da.total_cmp(&db).then(b.cmp(&a))
                    })
                    .expect("non-empty");
                centroids[c] = points[far].to_vec();
                labels[far] = c as u32;
                changed = true;
            } else {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        if !changed {
            break;
        }
    }
    (labels, centroids)
}

/// Plain k-means with k-means++ seeding.
pub fn kmeans(points: &[&[f64]], k: usize, seed: u64) -> Result<(Vec<u32>, Vec<Vec<f64>>)> {
    if points.len() < k || k == 0 {
        return Err(Error::NotEnoughPoints {
            needed: k.max(1),
            got: points.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init = plus_plus(points, k, &mut rng);
    Ok(lloyd(points, init))
}

/// Bayesian information criterion of a spherical Gaussian mixture with one
/// shared variance.
pub fn bic(points: &[&[f64]], labels: &[u32], centroids: &[Vec<f64>]) -> f64 {
    let r = points.len() as f64;
    let k = centroids.len() as f64;
    let dims = points.first().map_or(0, |p| p.len()) as f64;
    if r <= k {
        return f64::NEG_INFINITY;
    }
    let sse: f64 = points.iter().zip(labels).map(|(p, &l)| sq(p, &centroids[l as usize])).sum();
    let variance = sse / (dims * (r - k));
    if !(variance > 0.0) {
        return f64::NEG_INFINITY;
    }
    let mut sizes = vec![0f64; centroids.len()];
    for &l in labels {
        sizes[l as usize] += 1.0;
    }
    let loglik: f64 = sizes
        .iter()
        .filter(|&&n| n > 0.0)
        .map(|&n| n * n.ln() - n * r.ln() - n * dims / 2.0 * (2.0 * std::f64::consts::PI * variance).ln() - dims * (n - 1.0) / 2.0)
        .sum();
    let params = (k - 1.0) + dims * k + 1.0;
    loglik - params / 2.0 * r.ln()
}

/// X-means: k-means at `k_min`, then 2-way splits of each cluster kept
/// while they improve the local BIC, up to `k_max` clusters.
pub fn xmeans(points: &[&[f64]], cfg: &XMeansConfig) -> Result<Clustering> {
    let k_min = cfg.k_min.max(1);
    let k_max = cfg.k_max.max(k_min);
    if points.len() < k_min {
        return Err(Error::NotEnoughPoints {
            needed: k_min,
            got: points.len(),
        });
    }
    if points.iter().all(|p| *p == points[0]) {
        return Ok(Clustering {
            labels: vec![0; points.len()],
            centroids: vec![points[0].to_vec()],
            degenerate: true,
        });
    }

    let (mut labels, mut centroids) = kmeans(points, k_min, cfg.seed)?;
    let mut round = 0u64;
    while centroids.len() < k_max {
        round += 1;
        let mut next = Vec::new();
        let mut room = k_max - centroids.len();
        for (c, centre) in centroids.iter().enumerate() {
            let members: Vec<&[f64]> = points.iter().zip(&labels).filter(|(_, &l)| l as usize == c).map(|(p, _)| *p).collect();
            let split = if room > 0 && members.len() >= 4 && members.iter().any(|p| *p != members[0]) {
                let seed = derive_seed(cfg.seed, round * 1024 + c as u64);
                let (sub, subc) = kmeans(&members, 2, seed)?;
                let parent = bic(&members, &vec![0; members.len()], std::slice::from_ref(centre));
                let child = bic(&members, &sub, &subc);
                (child > parent && subc.len() == 2).then_some(subc)
            } else {
                None
            };
            match split {
                Some(children) => {
                    room -= 1;
                    next.extend(children);
                }
                None => next.push(centre.clone()),
            }
        }
        if next.len() == centroids.len() {
            break;
        }
        let refined = lloyd(points, next);
        labels = refined.0;
        centroids = refined.1;
    }
    Ok(Clustering {
        labels,
        centroids,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn blobs(centres: &[[f64; 2]], per: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = Normal::new(0.0, 0.5).unwrap();
        centres
            .iter()
            .flat_map(|c| (0..per).map(|_| vec![c[0] + n.sample(&mut rng), c[1] + n.sample(&mut rng)]).collect::<Vec<_>>())
            .collect()
    }

    fn refs(v: &[Vec<f64>]) -> Vec<&[f64]> {
        v.iter().map(|p| p.as_slice()).collect()
    }

    #[test]
    fn three_blobs() {
        let pts = blobs(&[[0.0, 0.0], [20.0, 0.0], [0.0, 20.0]], 40, 1);
        let c = xmeans(&refs(&pts), &XMeansConfig { seed: 5, ..Default::default() }).unwrap();
        assert_eq!(c.k(), 3);
        for b in 0..3 {
            let l = c.labels[b * 40];
            assert!(c.labels[b * 40..(b + 1) * 40].iter().all(|&x| x == l));
        }
    }

    #[test]
    fn fixed_k() {
        let pts = blobs(&[[0.0, 0.0], [20.0, 0.0], [0.0, 20.0]], 20, 2);
        let c = xmeans(&refs(&pts), &XMeansConfig { k_min: 2, k_max: 2, seed: 1 }).unwrap();
        assert_eq!(c.k(), 2);
        assert_eq!(c.labels.len(), 60);
    }

    #[test]
    fn single_point_rejected() {
        let pts = vec![vec![1.0, 1.0]];
        assert!(matches!(xmeans(&refs(&pts), &XMeansConfig::default()), Err(Error::NotEnoughPoints { needed: 2, got: 1 })));
    }

    #[test]
    fn identical_points_flagged() {
        let pts = vec![vec![1.0, 1.0]; 6];
        let c = xmeans(&refs(&pts), &XMeansConfig::default()).unwrap();
        assert!(c.degenerate);
        assert_eq!(c.k(), 1);
    }
}
