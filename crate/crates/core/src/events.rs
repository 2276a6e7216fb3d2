//! Event sequences around role changes: run-length compression, PV-DBOW
//! sequence vectors, their 2-D layout and per-period event shares.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::embedding::skipgram::{init_vectors, sgns_update, NoiseTable};
use crate::error::{Error, Result};
use crate::ingest::{EventType, InteractionEvent, PlayerId, Window};
use crate::roles::tsne::{project, TsneConfig};

pub const DEFAULT_BUCKET_MINUTES: i64 = 10;

/// Per-type event counts.
pub type EventCounts = BTreeMap<EventType, usize>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct CompressedSequence {
    pub player: PlayerId,
    pub window: Option<Window>,
    /// Event types with adjacent repeats collapsed.
    pub tokens: Vec<EventType>,
    /// Counts before compression.
    pub counts: EventCounts,
}

impl CompressedSequence {
    pub fn raw_len(&self) -> usize {
        self.counts.values().sum()
    }
}

/// Collapses runs of equal event types.
pub fn compress(events: &[EventType]) -> CompressedSequence {
    let mut tokens: Vec<EventType> = events.to_vec();
    tokens.dedup();
    let mut counts = EventCounts::new();
    for &e in events {
        *counts.entry(e).or_default() += 1;
    }
    CompressedSequence {
        player: PlayerId::new(),
        window: None,
        tokens,
        counts,
    }
}

/// `player`'s events inside `window`, in time order, compressed.
pub fn player_sequence(player: &str, events: &[InteractionEvent], window: Window) -> CompressedSequence {
    let types: Vec<EventType> = events
        .iter()
        .filter(|e| window.contains(e.occurred_at) && e.involves(player))
        .map(|e| e.event_type)
        .collect();
    CompressedSequence {
        player: player.to_owned(),
        window: Some(window),
        ..compress(&types)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DocEmbedConfig {
    pub dims: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    pub seed: u64,
}

impl Default for DocEmbedConfig {
    fn default() -> Self {
        DocEmbedConfig {
            dims: 32,
            negatives: 5,
            epochs: 20,
            lr_start: 0.025,
            lr_end: 0.0001,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceEmbeddings {
    pub dims: usize,
    pub players: Vec<PlayerId>,
    pub vectors: Vec<f32>,
    /// Empty sequences get a zero vector and are flagged here.
    pub empty: Vec<bool>,
}

impl SequenceEmbeddings {
    pub fn row(&self, i: usize) -> &[f32] {
        &self.vectors[i * self.dims..(i + 1) * self.dims]
    }

    pub fn get(&self, player: &str) -> Option<&[f32]> {
        self.players.iter().position(|p| p == player).map(|i| self.row(i))
    }
}

/// PV-DBOW: one vector per sequence, trained to predict the sequence's
/// tokens against negatives drawn from the corpus token frequencies.
pub fn embed_sequences(seqs: &[CompressedSequence], cfg: &DocEmbedConfig) -> Result<SequenceEmbeddings> {
    if cfg.dims == 0 {
        return Err(Error::invalid("dims must be positive"));
    }
    let d = cfg.dims;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut docs = init_vectors(seqs.len(), d, &mut rng);
    let mut words = vec![0f32; EventType::COUNT * d];
    let empty: Vec<bool> = seqs.iter().map(|s| s.tokens.is_empty()).collect();
    for (i, _) in empty.iter().enumerate().filter(|(_, &e)| e) {
        docs[i * d..(i + 1) * d].fill(0.0);
    }

    let mut freq = [0u64; EventType::COUNT];
    for s in seqs {
        for t in &s.tokens {
            freq[t.index()] += 1;
        }
    }
    let total: usize = seqs.iter().map(|s| s.tokens.len()).sum();
    if let Some(noise) = NoiseTable::new(&freq) {
        let steps = (total * cfg.epochs).max(1) as f64;
        let mut grad = vec![0f32; d];
        let mut done = 0usize;
        for epoch in 0..cfg.epochs {
            let mut loss = 0.0;
            for (i, s) in seqs.iter().enumerate() {
                for t in &s.tokens {
                    let lr = (cfg.lr_start - (cfg.lr_start - cfg.lr_end) * (done as f64 / steps)) as f32;
                    loss += sgns_update(&mut docs, &mut words, d, i, t.index(), cfg.negatives, &noise, lr, &mut grad, &mut rng);
                    done += 1;
                }
            }
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, loss });
            }
        }
    }
    Ok(SequenceEmbeddings {
        dims: d,
        players: seqs.iter().map(|s| s.player.clone()).collect(),
        vectors: docs,
        empty,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SequencePoint {
    pub player: PlayerId,
    pub x: f64,
    pub y: f64,
    /// Raw per-type counts, the glyph's sector radii.
    pub coxcomb: EventCounts,
    pub empty: bool,
}

/// t-SNE layout of the sequence vectors with their coxcomb counts attached.
pub fn project_sequences(seqs: &[CompressedSequence], emb: &SequenceEmbeddings, seed: u64) -> Result<Vec<SequencePoint>> {
    if seqs.len() != emb.players.len() {
        return Err(Error::DimensionMismatch {
            expected: seqs.len(),
            got: emb.players.len(),
        });
    }
    let data: Vec<f64> = emb.vectors.iter().map(|&v| v as f64).collect();
    let cfg = TsneConfig {
        seed,
        ..TsneConfig::default()
    };
    let xy = if seqs.is_empty() { Vec::new() } else { project(&data, emb.dims, &cfg)? };
    Ok(seqs
        .iter()
        .zip(xy)
        .zip(&emb.empty)
        .map(|((s, [x, y]), &empty)| SequencePoint {
            player: s.player.clone(),
            x,
            y,
            coxcomb: s.counts.clone(),
            empty,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct PeriodDistribution {
    pub period: usize,
    pub start: i64,
    pub total: usize,
    /// Share of each event type; empty when the period had no events.
    pub shares: BTreeMap<EventType, f64>,
    pub empty: bool,
}

pub fn bucket_of(ts: i64, bucket_minutes: i64) -> i64 {
    ts.div_euclid(bucket_minutes * 60)
}

/// Event shares of `ego` per wall-clock bucket. With a `span`, buckets cover
/// it entirely; otherwise they run from the first to the last ego event.
pub fn period_distributions(ego: &str, events: &[InteractionEvent], bucket_minutes: i64, span: Option<Window>) -> Result<Vec<PeriodDistribution>> {
    if bucket_minutes <= 0 {
        return Err(Error::invalid("bucket_minutes must be positive"));
    }
    let mine: Vec<&InteractionEvent> = events
        .iter()
        .filter(|e| e.involves(ego) && span.is_none_or(|w| w.contains(e.occurred_at)))
        .collect();
    let (first, last) = match span {
        Some(w) if w.end > w.start => (bucket_of(w.start, bucket_minutes), bucket_of(w.end - 1, bucket_minutes)),
        Some(_) => return Ok(Vec::new()),
        None => match (mine.iter().map(|e| e.occurred_at).min(), mine.iter().map(|e| e.occurred_at).max()) {
            (Some(a), Some(b)) => (bucket_of(a, bucket_minutes), bucket_of(b, bucket_minutes)),
            _ => return Ok(Vec::new()),
        },
    };
    let mut counts: Vec<EventCounts> = vec![EventCounts::new(); (last - first + 1) as usize];
    for e in mine {
        *counts[(bucket_of(e.occurred_at, bucket_minutes) - first) as usize].entry(e.event_type).or_default() += 1;
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            let total: usize = c.values().sum();
            PeriodDistribution {
                period: i,
                start: (first + i as i64) * bucket_minutes * 60,
                total,
                shares: c.into_iter().map(|(k, n)| (k, n as f64 / total as f64)).collect(),
                empty: total == 0,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use EventType::*;

    fn cosine(a: &[f32], b: &[f32]) -> f32 {
        let dot: f32 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na: f32 = a.iter().map(|x| x * x).sum::<f32>().sqrt();
        let nb: f32 = b.iter().map(|x| x * x).sum::<f32>().sqrt();
        dot / (na * nb)
    }

    fn seq(player: &str, tokens: &[EventType]) -> CompressedSequence {
        CompressedSequence {
            player: player.into(),
            ..compress(tokens)
        }
    }

    #[test]
    fn compress_cases() {
        let c = compress(&[Task, Task, Battle, Battle, Battle, Task]);
        assert_eq!(c.tokens, vec![Task, Battle, Task]);
        assert_eq!(c.raw_len(), 6);
        assert_eq!(compress(&c.tokens).tokens, c.tokens);
        assert!(compress(&[]).tokens.is_empty());
    }

    #[test]
    fn zero_epochs_returns_init() {
        let seqs = vec![seq("a", &[Task, Battle]), seq("b", &[])];
        let cfg = DocEmbedConfig { epochs: 0, ..Default::default() };
        let e = embed_sequences(&seqs, &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let init = init_vectors(2, 32, &mut rng);
        assert_eq!(e.row(0), &init[..32]);
        assert!(e.row(1).iter().all(|&v| v == 0.0));
        assert_eq!(e.empty, vec![false, true]);
    }

    #[test]
    fn duplicates_close_groups_apart() {
        let fight = [Battle, Fighting, KillingPlayer, Battle, Fighting, KillingPlayer, Battle, Fighting];
        let social = [Chatting, UsingProps, Task, Chatting, UsingProps, Task, Chatting, UsingProps];
        let mut seqs = Vec::new();
        for i in 0..10 {
            seqs.push(seq(&format!("f{i}"), &fight));
            seqs.push(seq(&format!("s{i}"), &social));
        }
        let e = embed_sequences(&seqs, &DocEmbedConfig { seed: 3, ..Default::default() }).unwrap();
        assert!(cosine(e.row(0), e.row(2)) > 0.95);
        assert!(cosine(e.row(1), e.row(3)) > 0.95);
        assert!(cosine(e.row(0), e.row(1)) < cosine(e.row(0), e.row(2)));
    }

    #[test]
    fn shares_of_one_bucket() {
        let ev = [
            InteractionEvent::new(0, "ego", Some("b"), Battle),
            InteractionEvent::new(60, "ego", Some("c"), Battle),
            InteractionEvent::new(120, "d", Some("ego"), Battle),
            InteractionEvent::new(180, "ego", Some("b"), Chatting),
            InteractionEvent::new(200, "x", Some("y"), Chatting),
        ];
        let p = period_distributions("ego", &ev, 10, None).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].shares[&Battle], 0.75);
        assert_eq!(p[0].shares[&Chatting], 0.25);
    }

    #[test]
    fn empty_bucket_kept() {
        let ev = [InteractionEvent::new(0, "ego", None, Task), InteractionEvent::new(1300, "ego", None, Task)];
        let p = period_distributions("ego", &ev, 10, None).unwrap();
        assert_eq!(p.len(), 3);
        assert!(p[1].empty && p[1].shares.is_empty());
    }
}
