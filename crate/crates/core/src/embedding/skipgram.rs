//! Skip-gram with negative sampling over a walk corpus.

use std::sync::atomic::{AtomicU32, Ordering};

use log::debug;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::walks::WalkCorpus;
use crate::error::{Error, Result};
use crate::seed::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMode {
    /// One worker, one random stream: bit-stable output.
    Deterministic,
    /// Lock-free updates from all rayon workers; output depends on scheduling.
    Parallel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SkipGramConfig {
    pub dims: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    /// word2vec's frequent-token subsampling threshold; 0 keeps every token.
    pub sample: f64,
    pub seed: u64,
    pub mode: TrainMode,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        SkipGramConfig {
            dims: 128,
            window: 10,
            negatives: 5,
            epochs: 5,
            lr_start: 0.025,
            lr_end: 0.0001,
            sample: 1e-3,
            seed: 0,
            mode: TrainMode::Deterministic,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkipGramModel {
    pub dims: usize,
    /// Row-major input vectors, one row per vocabulary entry.
    pub vectors: Vec<f32>,
    /// Row-major output (context) vectors.
    pub context: Vec<f32>,
    /// Mean loss per (centre, context) pair for each epoch.
    pub epoch_loss: Vec<f64>,
}

/// Trained rows carried into a new run.
#[derive(Debug, Clone, Copy)]
pub struct WarmStart<'a> {
    pub input: &'a [f32],
    pub context: &'a [f32],
    /// `(row in the new vocabulary, row in the carried matrices)`.
    pub rows: &'a [(usize, usize)],
}

impl SkipGramModel {
    pub fn row(&self, i: usize) -> &[f32] {
        &self.vectors[i * self.dims..(i + 1) * self.dims]
    }
}

/// Weight storage shared by the racy trainer's workers.
pub(crate) struct AtomicWeights(pub Vec<AtomicU32>);

impl AtomicWeights {
    fn from_slice(v: &[f32]) -> Self {
        AtomicWeights(v.iter().map(|x| AtomicU32::new(x.to_bits())).collect())
    }

    #[inline]
    fn get(&self, i: usize) -> f32 {
        f32::from_bits(self.0[i].load(Ordering::Relaxed))
    }

    #[inline]
    fn add(&self, i: usize, v: f32) {
        let cur = self.get(i);
        self.0[i].store((cur + v).to_bits(), Ordering::Relaxed);
    }

    fn into_vec(self) -> Vec<f32> {
        self.0.into_iter().map(|a| f32::from_bits(a.into_inner())).collect()
    }
}

/// Sixteen-lane dot product: independent partial sums keep the adds from
/// waiting on each other.
#[inline(always)]
pub(crate) fn dot(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = [0f32; 16];
    let (ca, cb) = (a.chunks_exact(16), b.chunks_exact(16));
    let tail: f32 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..16 {
            acc[k] += x[k] * y[k];
        }
    }
    acc.iter().sum::<f32>() + tail
}

const MAX_EXP: f32 = 6.0;
const SIGMOID_STEPS: usize = 1024;

/// word2vec's precomputed logistic over `[-MAX_EXP, MAX_EXP]`.
static SIGMOID: std::sync::LazyLock<[f32; SIGMOID_STEPS + 1]> = std::sync::LazyLock::new(|| {
    std::array::from_fn(|i| {
        let x = (i as f64 / SIGMOID_STEPS as f64 * 2.0 - 1.0) * MAX_EXP as f64;
        (1.0 / (1.0 + (-x).exp())) as f32
    })
});

#[inline(always)]
fn sigmoid(x: f32) -> f32 {
    if x >= MAX_EXP {
        1.0
    } else if x <= -MAX_EXP {
        0.0
    } else if x.is_nan() {
        f32::NAN
    } else {
        SIGMOID[((x + MAX_EXP) * (SIGMOID_STEPS as f32 / (2.0 * MAX_EXP))) as usize]
    }
}

/// Probability the model assigns to the observed label, floored so the
/// product over one update stays well inside f64 range.
#[inline]
fn label_prob(label: f32, p: f32) -> f64 {
    let q = if label == 1.0 { p } else { 1.0 - p };
    if q.is_nan() {
        f64::NAN
    } else {
        q.max(1e-7) as f64
    }
}

/// One positive and up to `negatives` sampled negative updates for input row
/// `input` predicting output row `target`. Returns the summed loss.
#[allow(clippy::too_many_arguments)]
pub(crate) fn sgns_update<R: Rng>(
    syn0: &mut [f32],
    syn1: &mut [f32],
    dims: usize,
    input: usize,
    target: usize,
    negatives: usize,
    noise: &NoiseTable,
    lr: f32,
    grad: &mut [f32],
    rng: &mut R,
) -> f64 {
    grad.iter_mut().for_each(|g| *g = 0.0);
    let v_in = &mut syn0[input * dims..(input + 1) * dims];
    let mut likelihood = 1.0f64;
    for s in 0..=negatives {
        let (out, label) = if s == 0 {
            (target, 1.0f32)
        } else {
            let n = noise.sample(rng);
            if n == target {
                continue;
            }
            (n, 0.0)
        };
        let v_out = &mut syn1[out * dims..(out + 1) * dims];
        let p = sigmoid(dot(v_in, v_out));
        likelihood *= label_prob(label, p);
        let g = (label - p) * lr;
        fused_update(grad, v_out, v_in, g);
    }
    for (v, g) in v_in.iter_mut().zip(grad.iter()) {
        *v += g;
    }
    -likelihood.ln()
}

/// `grad += g * out; out += g * input`, eight lanes at a time.
#[inline(always)]
fn fused_update(grad: &mut [f32], out: &mut [f32], input: &[f32], g: f32) {
    let mut gc = grad.chunks_exact_mut(8);
    let mut oc = out.chunks_exact_mut(8);
    let mut ic = input.chunks_exact(8);
    for ((gs, os), is) in (&mut gc).zip(&mut oc).zip(&mut ic) {
        let gs: &mut [f32; 8] = gs.try_into().unwrap();
        let os: &mut [f32; 8] = os.try_into().unwrap();
        let is: &[f32; 8] = is.try_into().unwrap();
        for k in 0..8 {
            gs[k] += g * os[k];
            os[k] += g * is[k];
        }
    }
    for ((gj, o), i) in gc.into_remainder().iter_mut().zip(oc.into_remainder()).zip(ic.remainder()) {
        *gj += g * *o;
        *o += g * i;
    }
}

#[allow(clippy::too_many_arguments)]
fn sgns_update_atomic<R: Rng>(
    syn0: &AtomicWeights,
    syn1: &AtomicWeights,
    dims: usize,
    input: usize,
    target: usize,
    negatives: usize,
    noise: &NoiseTable,
    lr: f32,
    buf: &mut [f32],
    rng: &mut R,
) -> f64 {
    let (grad, rest) = buf.split_at_mut(dims);
    let (v_in, v_out) = rest.split_at_mut(dims);
    grad.iter_mut().for_each(|g| *g = 0.0);
    let l0 = input * dims;
    for (j, v) in v_in.iter_mut().enumerate() {
        *v = syn0.get(l0 + j);
    }
    let mut likelihood = 1.0f64;
    for s in 0..=negatives {
        let (out, label) = if s == 0 {
            (target, 1.0f32)
        } else {
            let n = noise.sample(rng);
            if n == target {
                continue;
            }
            (n, 0.0)
        };
        let l1 = out * dims;
        for (j, v) in v_out.iter_mut().enumerate() {
            *v = syn1.get(l1 + j);
        }
        let p = sigmoid(dot(v_in, v_out));
        likelihood *= label_prob(label, p);
        let g = (label - p) * lr;
        for j in 0..dims {
            grad[j] += g * v_out[j];
            syn1.add(l1 + j, g * v_in[j]);
        }
    }
    for (j, g) in grad.iter().enumerate() {
        syn0.add(l0 + j, *g);
    }
    -likelihood.ln()
}

const NOISE_TABLE_BITS: u32 = 20;

/// word2vec-style lookup table holding token ids in proportion to
/// `freq^0.75`; one draw costs one random word.
pub(crate) struct NoiseTable {
    table: Vec<u32>,
}

impl NoiseTable {
    pub(crate) fn new(freq: &[u64]) -> Option<NoiseTable> {
        let weights: Vec<f64> = freq.iter().map(|&f| (f as f64).powf(0.75)).collect();
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return None;
        }
        let size = 1usize << NOISE_TABLE_BITS;
        let mut table = Vec::with_capacity(size);
        let mut cum = 0.0;
        for (i, w) in weights.iter().enumerate() {
            cum += w / total;
            let upto = ((cum * size as f64).round() as usize).min(size);
            while table.len() < upto {
                table.push(i as u32);
            }
        }
        let last = weights.iter().rposition(|&w| w > 0.0).unwrap_or(0) as u32;
        table.resize(size, last);
        Some(NoiseTable { table })
    }

    #[inline]
    pub(crate) fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        self.table[(rng.next_u32() >> (32 - NOISE_TABLE_BITS)) as usize] as usize
    }
}

pub(crate) fn init_vectors(rows: usize, dims: usize, rng: &mut ChaCha8Rng) -> Vec<f32> {
    let half = 0.5 / dims as f32;
    (0..rows * dims).map(|_| rng.random_range(-half..half)).collect()
}

/// Probability of keeping each token under word2vec's subsampling rule.
/// `None` when nothing would be dropped.
fn keep_probabilities(freq: &[u64], sample: f64) -> Option<Vec<f64>> {
    let total: u64 = freq.iter().sum();
    if sample <= 0.0 || total == 0 {
        return None;
    }
    let t = sample * total as f64;
    let keep: Vec<f64> = freq.iter().map(|&f| if f == 0 { 1.0 } else { ((f as f64 / t).sqrt() + 1.0) * t / f as f64 }).collect();
    keep.iter().any(|&k| k < 1.0).then_some(keep)
}

/// Copies the kept tokens of `walk` into `buf`.
fn subsample<'a, R: Rng>(walk: &'a [u32], keep: Option<&[f64]>, rng: &mut R, buf: &'a mut Vec<u32>) -> &'a [u32] {
    let Some(keep) = keep else { return walk };
    buf.clear();
    for &w in walk {
        let k = keep[w as usize];
        if k >= 1.0 || rng.random::<f64>() < k {
            buf.push(w);
        }
    }
    buf
}

struct Schedule {
    lr_start: f64,
    lr_end: f64,
    total: f64,
}

impl Schedule {
    fn at(&self, done: usize) -> f32 {
        let progress = (done as f64 / self.total).min(1.0);
        (self.lr_start - (self.lr_start - self.lr_end) * progress) as f32
    }
}

/// Visits every (centre, context) pair of `walk` with word2vec's reduced
/// window: the effective radius is uniform in `1..=window`.
fn for_each_pair<R: Rng>(walk: &[u32], window: usize, rng: &mut R, mut f: impl FnMut(usize, usize, &mut R)) {
    for (pos, &centre) in walk.iter().enumerate() {
        let b = rng.random_range(0..window.max(1));
        let radius = window.saturating_sub(b).max(1);
        let lo = pos.saturating_sub(radius);
        let hi = (pos + radius).min(walk.len() - 1);
        for (cpos, &ctx) in walk.iter().enumerate().take(hi + 1).skip(lo) {
            if cpos != pos {
                f(centre as usize, ctx as usize, rng);
            }
        }
    }
}

/// Trains input vectors for every vocabulary entry of `corpus`.
pub fn train_skipgram(corpus: &WalkCorpus, cfg: &SkipGramConfig) -> Result<SkipGramModel> {
    train_skipgram_from(corpus, cfg, None)
}

/// Like [`train_skipgram`], with the rows listed in `warm` starting from
/// previously trained vectors instead of random ones.
pub fn train_skipgram_from(corpus: &WalkCorpus, cfg: &SkipGramConfig, warm: Option<WarmStart>) -> Result<SkipGramModel> {
    if cfg.dims == 0 {
        return Err(Error::InvalidArgument("dims must be positive".into()));
    }
    if corpus.walks.is_empty() || corpus.vocab_size == 0 {
        return Err(Error::InvalidArgument("empty walk corpus".into()));
    }
    let n = corpus.vocab_size;
    let d = cfg.dims;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut syn0 = init_vectors(n, d, &mut rng);
    let mut syn1 = vec![0f32; n * d];
    if let Some(w) = warm {
        for &(to, from) in w.rows {
            let (src, dst) = (from * d..(from + 1) * d, to * d..(to + 1) * d);
            if src.end > w.input.len() || src.end > w.context.len() || dst.end > syn0.len() {
                return Err(Error::InvalidArgument(format!("warm start row {from} -> {to} out of range")));
            }
            syn0[dst.clone()].copy_from_slice(&w.input[src.clone()]);
            syn1[dst].copy_from_slice(&w.context[src]);
        }
    }
    if cfg.epochs == 0 {
        return Ok(SkipGramModel {
            dims: d,
            vectors: syn0,
            context: syn1,
            epoch_loss: Vec::new(),
        });
    }
    let freq = corpus.frequencies();
    let noise = NoiseTable::new(&freq).ok_or_else(|| Error::InvalidArgument("corpus has no tokens".into()))?;
    let keep = keep_probabilities(&freq, cfg.sample);
    let tokens = corpus.token_count();
    let schedule = Schedule {
        lr_start: cfg.lr_start,
        lr_end: cfg.lr_end,
        total: (tokens * cfg.epochs) as f64,
    };

    let mut epoch_loss = Vec::with_capacity(cfg.epochs);
    match cfg.mode {
        TrainMode::Deterministic => {
            let mut grad = vec![0f32; d];
            let mut buf = Vec::new();
            let mut done = 0usize;
            for epoch in 0..cfg.epochs {
                let (mut loss, mut pairs) = (0.0, 0u64);
                for walk in &corpus.walks {
                    let lr = schedule.at(done);
                    let kept = subsample(walk, keep.as_deref(), &mut rng, &mut buf);
                    for_each_pair(kept, cfg.window, &mut rng, |c, x, rng| {
                        loss += sgns_update(&mut syn0, &mut syn1, d, c, x, cfg.negatives, &noise, lr, &mut grad, rng);
                        pairs += 1;
                    });
                    done += walk.len();
                }
                epoch_loss.push(finish_epoch(epoch, loss, pairs)?);
            }
        }
        TrainMode::Parallel => {
            let w0 = AtomicWeights::from_slice(&syn0);
            let w1 = AtomicWeights::from_slice(&syn1);
            let offsets: Vec<usize> = corpus
                .walks
                .iter()
                .scan(0usize, |acc, w| {
                    let start = *acc;
                    *acc += w.len();
                    Some(start)
                })
                .collect();
            for epoch in 0..cfg.epochs {
                let base = epoch * tokens;
                let (loss, pairs) = corpus
                    .walks
                    .par_iter()
                    .enumerate()
                    .map(|(i, walk)| {
                        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, (epoch * corpus.walks.len() + i) as u64));
                        let mut buf = vec![0f32; 3 * d];
                        let mut kept = Vec::new();
                        let lr = schedule.at(base + offsets[i]);
                        let (mut loss, mut pairs) = (0.0, 0u64);
                        let walk = subsample(walk, keep.as_deref(), &mut rng, &mut kept);
                        for_each_pair(walk, cfg.window, &mut rng, |c, x, rng| {
                            loss += sgns_update_atomic(&w0, &w1, d, c, x, cfg.negatives, &noise, lr, &mut buf, rng);
                            pairs += 1;
                        });
                        (loss, pairs)
                    })
                    .reduce(|| (0.0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
                epoch_loss.push(finish_epoch(epoch, loss, pairs)?);
            }
            syn0 = w0.into_vec();
            syn1 = w1.into_vec();
        }
    }

    if syn0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Diverged {
            epoch: cfg.epochs,
            loss: f64::NAN,
        });
    }
    Ok(SkipGramModel {
        dims: d,
        vectors: syn0,
        context: syn1,
        epoch_loss,
    })
}

fn finish_epoch(epoch: usize, loss: f64, pairs: u64) -> Result<f64> {
    let mean = if pairs == 0 { 0.0 } else { loss / pairs as f64 };
    if !mean.is_finite() {
        return Err(Error::Diverged { epoch, loss: mean });
    }
    debug!("skip-gram epoch {epoch}: mean loss {mean:.5}");
    Ok(mean)
}
