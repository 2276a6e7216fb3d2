//! Translation alignment of consecutive embedding spaces.
//!
//! For each consecutive pair a single relation vector `r` is learned with a
//! margin ranking loss over anchors (players present at both timestamps):
//! `e_t(v) + r` should land closer to `e_{t+1}(v)` than to a corrupted
//! `e_{t+1}(v')`. The later space is then shifted by `-r`.

use log::warn;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingSpace;
use crate::error::{Error, Result};
use crate::seed::derive_seed;

/// Anchor count up to which the selection loss uses every ordered pair.
const FULL_PAIR_ANCHORS: usize = 64;
const SELECTION_NEGATIVES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignConfig {
    pub margin: f64,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    /// Fit an orthogonal rotation plus translation instead of a translation.
    pub procrustes: bool,
}

impl Default for AlignConfig {
    fn default() -> Self {
        AlignConfig {
            margin: 1.0,
            epochs: 50,
            lr: 0.01,
            seed: 0,
            procrustes: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct AlignmentRelation {
    pub from_t: usize,
    pub to_t: usize,
    pub r: Vec<f64>,
    pub anchor_count: usize,
    /// Mean Euclidean anchor displacement before and after alignment.
    pub residual_before: f64,
    pub residual_after: f64,
    /// Row-major `d x d` rotation, present only in Procrustes mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation: Option<Vec<f64>>,
}

/// Anchor rows `(i in from, j in to)`, sorted by player id.
pub fn anchors(from: &EmbeddingSpace, to: &EmbeddingSpace) -> Vec<(usize, usize)> {
    from.ids
        .iter()
        .enumerate()
        .filter_map(|(i, p)| to.index_of(p).map(|j| (i, j)))
        .collect()
}

fn dist(a: &[f64], r: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(r).zip(b).map(|((x, s), y)| (x + s - y).powi(2)).sum::<f64>().sqrt()
}

fn residual(from: &EmbeddingSpace, to: &EmbeddingSpace, pairs: &[(usize, usize)], r: &[f64]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    pairs.iter().map(|&(i, j)| dist(from.row(i), r, to.row(j))).sum::<f64>() / pairs.len() as f64
}

struct MarginLoss<'a> {
    from: &'a EmbeddingSpace,
    to: &'a EmbeddingSpace,
    pairs: &'a [(usize, usize)],
    margin: f64,
}

impl MarginLoss<'_> {
    /// Hinge term for anchor `a` against corrupted anchor `b`, with gradient.
    fn term(&self, a: usize, b: usize, r: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let (i, j) = self.pairs[a];
        let (_, jn) = self.pairs[b];
        let h = self.from.row(i);
        let pos = dist(h, r, self.to.row(j));
        let neg = dist(h, r, self.to.row(jn));
        let loss = self.margin + pos - neg;
        if loss <= 0.0 {
            return 0.0;
        }
        if let Some(g) = grad {
            let (tp, tn) = (self.to.row(j), self.to.row(jn));
            for k in 0..g.len() {
                let dp = h[k] + r[k] - tp[k];
                let dn = h[k] + r[k] - tn[k];
                if pos > 0.0 {
                    g[k] += dp / pos;
                }
                if neg > 0.0 {
                    g[k] -= dn / neg;
                }
            }
        }
        loss
    }
}

/// Fixed corruption set used to compare candidate relations.
fn selection_pairs(n: usize, seed: u64) -> Vec<(usize, usize)> {
    if n <= FULL_PAIR_ANCHORS {
        return (0..n).flat_map(|a| (0..n).filter(move |&b| b != a).map(move |b| (a, b))).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, u64::MAX));
    (0..n)
        .flat_map(|a| {
            (0..SELECTION_NEGATIVES)
                .map(|_| (a, corrupt(a, n, &mut rng)))
                .collect::<Vec<_>>()
        })
        .collect()
}

fn corrupt<R: Rng>(a: usize, n: usize, rng: &mut R) -> usize {
    let b = rng.random_range(0..n - 1);
    if b >= a {
        b + 1
    } else {
        b
    }
}

/// Learns the relation between `from` (time t) and `to` (time t+1) and
/// returns `to` expressed in the frame of `from`.
pub fn align_pair(from: &EmbeddingSpace, to: &EmbeddingSpace, cfg: &AlignConfig) -> Result<(AlignmentRelation, EmbeddingSpace)> {
    if !from.is_empty() && !to.is_empty() && from.dims != to.dims {
        return Err(Error::DimensionMismatch {
            expected: from.dims,
            got: to.dims,
        });
    }
    let d = to.dims;
    let pairs = anchors(from, to);
    let zero = vec![0.0; d];
    let before = residual(from, to, &pairs, &zero);
    if pairs.is_empty() {
        warn!("no anchors between timestamps {} and {}; identity alignment", from.timestamp, to.timestamp);
        let rel = AlignmentRelation {
            from_t: from.timestamp,
            to_t: to.timestamp,
            r: zero,
            anchor_count: 0,
            residual_before: 0.0,
            residual_after: 0.0,
            rotation: None,
        };
        return Ok((rel, to.clone()));
    }
    if cfg.procrustes {
        return align_procrustes(from, to, &pairs, before);
    }

    let n = pairs.len() as f64;
    let mut r = vec![0.0; d];
    for &(i, j) in &pairs {
        for ((rk, x), y) in r.iter_mut().zip(from.row(i)).zip(to.row(j)) {
            *rk += (y - x) / n;
        }
    }

    let mut candidates = vec![r.clone()];
    if pairs.len() >= 2 {
        let loss = MarginLoss {
            from,
            to,
            pairs: &pairs,
            margin: cfg.margin,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut grad = vec![0.0; d];
        for _ in 0..cfg.epochs {
            for a in 0..pairs.len() {
                let b = corrupt(a, pairs.len(), &mut rng);
                grad.iter_mut().for_each(|g| *g = 0.0);
                if loss.term(a, b, &r, Some(&mut grad)) > 0.0 {
                    for (rk, g) in r.iter_mut().zip(&grad) {
                        *rk -= cfg.lr * g;
                    }
                }
            }
            candidates.push(r.clone());
        }
        candidates.push(zero.clone());

        // keep the iterate with the lowest margin loss that does not move
        // anchors further apart; earlier candidates win ties
        let eval = selection_pairs(pairs.len(), cfg.seed);
        let scored: Vec<(f64, f64)> = candidates
            .par_iter()
            .map(|c| {
                let l = eval.iter().map(|&(a, b)| loss.term(a, b, c, None)).sum::<f64>();
                (l, residual(from, to, &pairs, c))
            })
            .collect();
        let best = scored
            .iter()
            .enumerate()
            .filter(|(_, (_, res))| *res <= before)
            .min_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
            .map(|(i, _)| i)
            .unwrap_or(candidates.len() - 1);
        r = candidates.swap_remove(best);
    } else if residual(from, to, &pairs, &r) > before {
        r = zero;
    }

    let after = residual(from, to, &pairs, &r);
    let data = (0..to.len())
        .flat_map(|i| to.row(i).iter().zip(&r).map(|(x, s)| x - s).collect::<Vec<_>>())
        .collect();
    let aligned = EmbeddingSpace::new(to.timestamp, d, to.ids.clone(), data)?;
    let rel = AlignmentRelation {
        from_t: from.timestamp,
        to_t: to.timestamp,
        r,
        anchor_count: pairs.len(),
        residual_before: before,
        residual_after: after,
        rotation: None,
    };
    Ok((rel, aligned))
}

fn align_procrustes(from: &EmbeddingSpace, to: &EmbeddingSpace, pairs: &[(usize, usize)], before: f64) -> Result<(AlignmentRelation, EmbeddingSpace)> {
    let d = to.dims;
    let n = pairs.len();
    let a = DMatrix::from_fn(n, d, |k, c| from.row(pairs[k].0)[c]);
    let b = DMatrix::from_fn(n, d, |k, c| to.row(pairs[k].1)[c]);
    let mu_a = a.row_mean();
    let mu_b = b.row_mean();
    let ac = DMatrix::from_fn(n, d, |k, c| a[(k, c)] - mu_a[c]);
    let bc = DMatrix::from_fn(n, d, |k, c| b[(k, c)] - mu_b[c]);
    let svd = (bc.transpose() * &ac).svd(true, true);
    let (Some(u), Some(v_t)) = (svd.u, svd.v_t) else {
        return Err(Error::invalid("SVD failed during Procrustes alignment"));
    };
    let q = u * v_t;
    let map = |x: &[f64]| -> Vec<f64> {
        (0..d)
            .map(|c| (0..d).map(|k| (x[k] - mu_b[k]) * q[(k, c)]).sum::<f64>() + mu_a[c])
            .collect()
    };
    let data: Vec<f64> = (0..to.len()).flat_map(|i| map(to.row(i))).collect();
    let aligned = EmbeddingSpace::new(to.timestamp, d, to.ids.clone(), data)?;
    let zero = vec![0.0; d];
    let after = residual(from, &aligned, pairs, &zero);
    if after > before {
        return align_pair(from, to, &AlignConfig { procrustes: false, ..AlignConfig::default() });
    }
    // translation expressed in the rotated frame: aligned = x Q - r
    let r: Vec<f64> = (0..d)
        .map(|c| (0..d).map(|k| mu_b[k] * q[(k, c)]).sum::<f64>() - mu_a[c])
        .collect();
    let rel = AlignmentRelation {
        from_t: from.timestamp,
        to_t: to.timestamp,
        r,
        anchor_count: pairs.len(),
        residual_before: before,
        residual_after: after,
        rotation: Some(q.transpose().iter().copied().collect()),
    };
    Ok((rel, aligned))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignedChain {
    pub spaces: Vec<EmbeddingSpace>,
    pub relations: Vec<AlignmentRelation>,
    /// Maximal runs of timestamps connected by anchors.
    pub segments: Vec<Vec<usize>>,
}

/// Aligns every space into the frame of the first one by composing the
/// pairwise relations left to right. A pair without anchors is bridged by
/// the identity and starts a new segment.
pub fn align_chain(spaces: &[EmbeddingSpace], cfg: &AlignConfig) -> Result<AlignedChain> {
    if spaces.is_empty() {
        return Ok(AlignedChain {
            spaces: Vec::new(),
            relations: Vec::new(),
            segments: Vec::new(),
        });
    }
    let seeded = |k: usize| AlignConfig {
        seed: derive_seed(cfg.seed, k as u64),
        ..*cfg
    };
    let mut out = vec![spaces[0].clone()];
    let mut segments = vec![vec![spaces[0].timestamp]];
    let mut relations = Vec::with_capacity(spaces.len() - 1);
    let mut push = |rel: AlignmentRelation, next: EmbeddingSpace, out: &mut Vec<EmbeddingSpace>| {
        if rel.anchor_count == 0 {
            segments.push(Vec::new());
        }
        segments.last_mut().expect("segment").push(next.timestamp);
        out.push(next);
        relations.push(rel);
    };

    if cfg.procrustes {
        // affine maps do not compose by addition; align against the
        // already aligned predecessor instead
        for k in 0..spaces.len() - 1 {
            let (rel, next) = align_pair(&out[k], &spaces[k + 1], &seeded(k))?;
            push(rel, next, &mut out);
        }
    } else {
        let results: Vec<(AlignmentRelation, EmbeddingSpace)> = spaces
            .par_windows(2)
            .enumerate()
            .map(|(k, w)| align_pair(&w[0], &w[1], &seeded(k)))
            .collect::<Result<_>>()?;
        let mut shift = vec![0.0; spaces[0].dims];
        for (rel, local) in results {
            // `local` sits in the frame of its predecessor; the accumulated
            // shift carries it into frame 0
            for (s, r) in shift.iter_mut().zip(&rel.r) {
                *s -= r;
            }
            let data = (0..local.len())
                .flat_map(|i| local.row(i).iter().zip(&rel.r).zip(&shift).map(|((x, r), s)| x + r + s).collect::<Vec<_>>())
                .collect();
            let next = EmbeddingSpace::new(local.timestamp, local.dims, local.ids.clone(), data)?;
            push(rel, next, &mut out);
        }
    }
    drop(push);
    Ok(AlignedChain {
        spaces: out,
        relations,
        segments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space(t: usize, rows: &[&[f64]]) -> EmbeddingSpace {
        let ids = (0..rows.len()).map(|i| format!("p{i}")).collect();
        EmbeddingSpace::new(t, rows[0].len(), ids, rows.concat()).unwrap()
    }

    #[test]
    fn identical_spaces() {
        let a = space(0, &[&[0.1, 0.2], &[0.3, -0.1], &[0.0, 0.5]]);
        let mut b = a.clone();
        b.timestamp = 1;
        let (rel, _) = align_pair(&a, &b, &AlignConfig::default()).unwrap();
        assert!(rel.r.iter().all(|x| x.abs() < 1e-12));
        assert!(rel.residual_after < 1e-12);
    }

    #[test]
    fn single_anchor_closed_form() {
        let a = space(0, &[&[1.0, 2.0]]);
        let b = space(1, &[&[1.5, 1.0]]);
        let (rel, aligned) = align_pair(&a, &b, &AlignConfig::default()).unwrap();
        assert_eq!(rel.r, vec![0.5, -1.0]);
        assert_eq!(rel.residual_after, 0.0);
        assert_eq!(aligned.row(0), a.row(0));
    }

    #[test]
    fn no_anchors_identity() {
        let a = space(0, &[&[1.0, 2.0]]);
        let mut b = space(1, &[&[1.5, 1.0]]);
        b.ids = vec!["q".into()];
        let (rel, aligned) = align_pair(&a, &b, &AlignConfig::default()).unwrap();
        assert_eq!(rel.anchor_count, 0);
        assert_eq!(aligned, b);
    }

    #[test]
    fn dimension_mismatch() {
        let a = space(0, &[&[1.0, 2.0]]);
        let b = space(1, &[&[1.0, 2.0, 3.0]]);
        assert!(align_pair(&a, &b, &AlignConfig::default()).is_err());
    }

    #[test]
    fn procrustes_recovers_rotation() {
        let a = space(0, &[&[1.0, 0.0], &[0.0, 2.0], &[-1.0, -1.0], &[0.5, 0.3]]);
        // rotate by 90 degrees and shift
        let rows: Vec<Vec<f64>> = (0..4).map(|i| vec![-a.row(i)[1] + 3.0, a.row(i)[0] - 1.0]).collect();
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let b = space(1, &refs);
        let cfg = AlignConfig { procrustes: true, ..Default::default() };
        let (rel, aligned) = align_pair(&a, &b, &cfg).unwrap();
        assert!(rel.residual_after < 1e-9);
        assert!(rel.rotation.is_some());
        for i in 0..4 {
            for c in 0..2 {
                assert!((aligned.row(i)[c] - a.row(i)[c]).abs() < 1e-9);
            }
        }
    }
}
