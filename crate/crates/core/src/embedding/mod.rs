//! Per-timestamp node embeddings.
//!
//! The structural method builds multilayer structural distances, samples
//! biased walks on the resulting context graph and trains skip-gram vectors.
//! The proximity baseline feeds the same trainer with uniform walks.

pub mod context;
pub mod skipgram;
pub mod structural;
pub mod walks;

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

pub use context::{ContextGraph, StepDistribution};
pub use skipgram::{train_skipgram, train_skipgram_from, SkipGramConfig, SkipGramModel, TrainMode, WarmStart};
pub use structural::{all_structural_distances, ordered_degree_sequence, structural_distance, PairSelection, StructuralDistances};
pub use walks::{deepwalk_walks, generate_walks, WalkConfig, WalkCorpus};

use crate::error::{Error, Result};
use crate::ingest::PlayerId;
use crate::metrics::Topology;
use crate::seed::stage_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum EmbedMethod {
    Struc2vec,
    Deepwalk,
}

impl EmbedMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            EmbedMethod::Struc2vec => "struc2vec",
            EmbedMethod::Deepwalk => "deepwalk",
        }
    }
}

impl std::str::FromStr for EmbedMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "struc2vec" | "struc2vec_align" => Ok(EmbedMethod::Struc2vec),
            "deepwalk" | "deepwalk_align" | "deepwalk-align" => Ok(EmbedMethod::Deepwalk),
            other => Err(format!("unknown embedding method `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedConfig {
    pub method: EmbedMethod,
    pub walks: WalkConfig,
    pub skipgram: SkipGramConfig,
    /// Node count above which structural pairs are pruned.
    pub exact_node_limit: usize,
    /// Start each timestamp's trainer from the previous timestamp's vectors
    /// for the players both graphs share.
    pub warm_start: bool,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        EmbedConfig {
            method: EmbedMethod::Struc2vec,
            walks: WalkConfig::default(),
            skipgram: SkipGramConfig::default(),
            exact_node_limit: 2000,
            warm_start: true,
        }
    }
}

impl EmbedConfig {
    /// Copy with every random stream derived from `seed` and the timestamp.
    pub fn seeded(&self, seed: u64, timestamp: usize) -> EmbedConfig {
        let mut c = *self;
        c.walks.seed = stage_seed(seed, "walks", timestamp as u64);
        c.skipgram.seed = stage_seed(seed, "skipgram", timestamp as u64);
        c
    }
}

/// Vectors of all players of one timestamp, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSpace {
    pub timestamp: usize,
    pub dims: usize,
    pub ids: Vec<PlayerId>,
    pub data: Vec<f64>,
}

impl EmbeddingSpace {
    pub fn new(timestamp: usize, dims: usize, ids: Vec<PlayerId>, data: Vec<f64>) -> Result<Self> {
        if data.len() != ids.len() * dims {
            return Err(Error::DimensionMismatch {
                expected: ids.len() * dims,
                got: data.len(),
            });
        }
        Ok(EmbeddingSpace { timestamp, dims, ids, data })
    }

    pub fn empty(timestamp: usize, dims: usize) -> Self {
        EmbeddingSpace {
            timestamp,
            dims,
            ids: Vec::new(),
            data: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dims..(i + 1) * self.dims]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.binary_search_by(|p| p.as_str().cmp(id)).ok().or_else(|| self.ids.iter().position(|p| p == id))
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.index_of(id).map(|i| self.row(i))
    }

    /// Little-endian f32 matrix, the on-disk form.
    pub fn write_f32<W: Write>(&self, mut w: W) -> Result<()> {
        let mut buf = Vec::with_capacity(self.data.len() * 4);
        for v in &self.data {
            buf.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_f32<R: Read>(mut r: R, timestamp: usize, dims: usize, ids: Vec<PlayerId>) -> Result<Self> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)?;
        if buf.len() != ids.len() * dims * 4 {
            return Err(Error::DimensionMismatch {
                expected: ids.len() * dims * 4,
                got: buf.len(),
            });
        }
        let data = buf
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        EmbeddingSpace::new(timestamp, dims, ids, data)
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Walk corpus for `topo` under the configured method.
pub fn build_corpus(topo: &Topology, cfg: &EmbedConfig) -> WalkCorpus {
    match cfg.method {
        EmbedMethod::Struc2vec => {
            let selection = PairSelection {
                exact_node_limit: cfg.exact_node_limit,
                seed: cfg.walks.seed,
            };
            let ctx = ContextGraph::build(&all_structural_distances(topo, &selection));
            generate_walks(&ctx, &cfg.walks)
        }
        EmbedMethod::Deepwalk => deepwalk_walks(topo, &cfg.walks),
    }
}

/// Embeds every node of `topo`. An empty graph yields an empty space.
pub fn embed_topology(topo: &Topology, timestamp: usize, cfg: &EmbedConfig) -> Result<EmbeddingSpace> {
    Ok(embed_topology_from(topo, timestamp, cfg, None)?.space)
}

/// A trained space plus the matrices a later timestamp can start from.
#[derive(Debug, Clone)]
pub struct Trained {
    pub space: EmbeddingSpace,
    input: Vec<f32>,
    context: Vec<f32>,
}

/// [`embed_topology`], starting shared players from `prev` when given.
pub fn embed_topology_from(topo: &Topology, timestamp: usize, cfg: &EmbedConfig, prev: Option<&Trained>) -> Result<Trained> {
    let dims = cfg.skipgram.dims;
    if topo.is_empty() {
        return Ok(Trained {
            space: EmbeddingSpace::empty(timestamp, dims),
            input: Vec::new(),
            context: Vec::new(),
        });
    }
    let corpus = build_corpus(topo, cfg);
    let rows: Vec<(usize, usize)> = match prev {
        Some(p) if p.space.dims == dims => topo.ids.iter().enumerate().filter_map(|(i, id)| p.space.index_of(id).map(|j| (i, j))).collect(),
        _ => Vec::new(),
    };
    let warm = prev.filter(|_| !rows.is_empty()).map(|p| WarmStart {
        input: &p.input,
        context: &p.context,
        rows: &rows,
    });
    let model = train_skipgram_from(&corpus, &cfg.skipgram, warm)?;
    let data = model.vectors.iter().map(|&v| v as f64).collect();
    Ok(Trained {
        space: EmbeddingSpace::new(timestamp, dims, topo.ids.clone(), data)?,
        input: model.vectors,
        context: model.context,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f32_roundtrip() {
        let s = EmbeddingSpace::new(2, 2, vec!["a".into(), "b".into()], vec![0.5, -1.0, 2.0, 0.25]).unwrap();
        let mut buf = Vec::new();
        s.write_f32(&mut buf).unwrap();
        assert_eq!(buf.len(), 16);
        let back = EmbeddingSpace::read_f32(&buf[..], 2, 2, s.ids.clone()).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.get("b"), Some(&[2.0, 0.25][..]));
    }

    #[test]
    fn empty_topology() {
        let s = embed_topology(&Topology::default(), 0, &EmbedConfig::default()).unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn method_names() {
        assert_eq!("deepwalk".parse::<EmbedMethod>(), Ok(EmbedMethod::Deepwalk));
        assert_eq!(EmbedMethod::Struc2vec.as_str(), "struc2vec");
    }
}
