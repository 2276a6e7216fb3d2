//! Role candidates: projection and clustering of aligned embeddings, cluster
//! summaries, identity matching across snapshots and role flows.

pub mod divergence;
pub mod flows;
pub mod identity;
pub mod tsne;
pub mod xmeans;

use std::collections::{BTreeMap, BTreeSet};

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

pub use divergence::{evaluate_clustering, js_divergence, EvaluationReport, MetricScore};
pub use flows::{compute_flows, FlowKind, RoleRef, TransitionFlow};
pub use identity::match_role_identities;
pub use tsne::TsneConfig;
pub use xmeans::XMeansConfig;

use crate::embedding::EmbeddingSpace;
use crate::error::{Error, Result};
use crate::ingest::{InGameMetrics, PlayerId, Snapshot, TimestampGraph};
use crate::metrics::{Metric, NodeMetricRow};
use crate::seed::stage_seed;
use crate::stats::{entropy, BoxStats};

/// A player at one timestamp.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema)]
pub struct Instance {
    pub player: PlayerId,
    pub timestamp: usize,
}

impl Instance {
    pub fn new(player: impl Into<PlayerId>, timestamp: usize) -> Self {
        Instance {
            player: player.into(),
            timestamp,
        }
    }
}

/// Per-instance graph metrics and in-game values, with pooled min-max bounds.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InstanceTable {
    pub metrics: BTreeMap<Instance, [f64; 6]>,
    pub ingame: BTreeMap<Instance, InGameMetrics>,
    min: [f64; 6],
    max: [f64; 6],
}

impl InstanceTable {
    pub fn new(rows: &[NodeMetricRow], graphs: &[TimestampGraph]) -> Self {
        let metrics: BTreeMap<Instance, [f64; 6]> = rows.iter().map(|r| (Instance::new(r.player.clone(), r.timestamp), r.values())).collect();
        let ingame = graphs
            .iter()
            .flat_map(|g| g.ingame.iter().map(move |(p, m)| (Instance::new(p.clone(), g.index), *m)))
            .collect();
        let mut min = [f64::INFINITY; 6];
        let mut max = [f64::NEG_INFINITY; 6];
        for v in metrics.values() {
            for m in 0..6 {
                min[m] = min[m].min(v[m]);
                max[m] = max[m].max(v[m]);
            }
        }
        InstanceTable { metrics, ingame, min, max }
    }

    /// Metric values mapped onto `[0, 1]` by the pooled bounds.
    pub fn normalized(&self, inst: &Instance) -> Option<[f64; 6]> {
        let v = self.metrics.get(inst)?;
        Some(std::array::from_fn(|m| {
            let span = self.max[m] - self.min[m];
            if span > 0.0 {
                (v[m] - self.min[m]) / span
            } else {
                0.0
            }
        }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterInput {
    /// Cluster the 2-D projections.
    Projection,
    /// Cluster the aligned embedding vectors directly.
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoleConfig {
    pub tsne: TsneConfig,
    pub xmeans: XMeansConfig,
    pub cluster_on: ClusterInput,
    pub tau: f64,
    pub seed: u64,
}

impl Default for RoleConfig {
    fn default() -> Self {
        RoleConfig {
            tsne: TsneConfig::default(),
            xmeans: XMeansConfig::default(),
            cluster_on: ClusterInput::Projection,
            tau: 0.3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ProjectedPoint {
    pub player: PlayerId,
    pub timestamp: usize,
    pub x: f64,
    pub y: f64,
    pub cluster: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct TimeDistribution {
    /// Member count per timestamp index.
    pub counts: BTreeMap<usize, usize>,
    pub boxplot: BoxStats,
    pub entropy: f64,
}

impl TimeDistribution {
    pub fn of(members: &[Instance]) -> Option<Self> {
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for m in members {
            *counts.entry(m.timestamp).or_default() += 1;
        }
        let ts: Vec<f64> = members.iter().map(|m| m.timestamp as f64).collect();
        let c: Vec<f64> = counts.values().map(|&c| c as f64).collect();
        Some(TimeDistribution {
            boxplot: BoxStats::of(&ts)?,
            entropy: entropy(&c),
            counts,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct RoleCluster {
    pub snapshot: usize,
    pub cluster_id: u32,
    pub color_id: u32,
    pub size: usize,
    pub members: Vec<Instance>,
    /// Radar values: mean of each normalized metric.
    pub metric_means: BTreeMap<Metric, f64>,
    /// Normalized 20-bin histograms of each normalized metric.
    pub metric_histograms: BTreeMap<Metric, Vec<f64>>,
    pub metric_boxes: BTreeMap<Metric, BoxStats>,
    /// Raw in-game values keyed `cash`, `grade`, `intimacy`, `combat`.
    pub ingame_boxes: BTreeMap<String, BoxStats>,
    pub time_distribution: TimeDistribution,
}

impl RoleCluster {
    pub fn players(&self) -> BTreeSet<&PlayerId> {
        self.members.iter().map(|m| &m.player).collect()
    }
}

/// Builds the summary of one cluster.
pub fn summarize_cluster(snapshot: usize, cluster_id: u32, mut members: Vec<Instance>, table: &InstanceTable) -> Result<RoleCluster> {
    if members.is_empty() {
        return Err(Error::invalid("empty cluster"));
    }
    members.sort();
    let norm: Vec<[f64; 6]> = members.iter().map(|m| table.normalized(m).unwrap_or([0.0; 6])).collect();
    let mut metric_means = BTreeMap::new();
    let mut metric_histograms = BTreeMap::new();
    let mut metric_boxes = BTreeMap::new();
    for (k, &metric) in Metric::ALL.iter().enumerate() {
        let col: Vec<f64> = norm.iter().map(|r| r[k]).collect();
        metric_means.insert(metric, crate::stats::mean(&col));
        let mut counts = vec![0.0; divergence::ROLE_BINS];
        for &v in &col {
            counts[crate::stats::bin_of(v, 0.0, 1.0, divergence::ROLE_BINS)] += 1.0;
        }
        let total = col.len() as f64;
        metric_histograms.insert(metric, counts.iter().map(|c| c / total).collect());
        metric_boxes.insert(metric, BoxStats::of(&col).expect("non-empty"));
    }
    let mut ingame_cols: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for m in &members {
        let g = table.ingame.get(m).copied().unwrap_or_default();
        for (key, v) in [("cash", g.cash), ("grade", g.grade), ("intimacy", g.intimacy_total), ("combat", g.combat_score)] {
            ingame_cols.entry(key.to_owned()).or_default().push(v);
        }
    }
    let ingame_boxes = ingame_cols.into_iter().map(|(k, v)| (k, BoxStats::of(&v).expect("non-empty"))).collect();
    Ok(RoleCluster {
        snapshot,
        cluster_id,
        color_id: cluster_id,
        size: members.len(),
        time_distribution: TimeDistribution::of(&members).expect("non-empty"),
        members,
        metric_means,
        metric_histograms,
        metric_boxes,
        ingame_boxes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SnapshotRoles {
    pub snapshot: usize,
    pub timestamps: Vec<usize>,
    pub points: Vec<ProjectedPoint>,
    /// Ordered by size, largest first; `cluster_id` is the position.
    pub clusters: Vec<RoleCluster>,
    /// Every instance had the same vector and one cluster was formed.
    pub degenerate: bool,
}

impl SnapshotRoles {
    /// Cluster of each instance in this snapshot.
    pub fn assignment(&self) -> BTreeMap<Instance, u32> {
        self.points
            .iter()
            .map(|p| (Instance::new(p.player.clone(), p.timestamp), p.cluster))
            .collect()
    }

    pub fn cluster(&self, id: u32) -> Option<&RoleCluster> {
        self.clusters.get(id as usize)
    }
}

/// Gathers the instances of the given spaces as one matrix.
fn stack(spaces: &[&EmbeddingSpace]) -> Result<(Vec<Instance>, Vec<f64>, usize)> {
    let dims = spaces.iter().find(|s| !s.is_empty()).map_or(0, |s| s.dims);
    let mut instances = Vec::new();
    let mut data = Vec::new();
    for s in spaces {
        if s.is_empty() {
            continue;
        }
        if s.dims != dims {
            return Err(Error::DimensionMismatch {
                expected: dims,
                got: s.dims,
            });
        }
        for (i, id) in s.ids.iter().enumerate() {
            instances.push(Instance::new(id.clone(), s.timestamp));
            data.extend_from_slice(s.row(i));
        }
    }
    Ok((instances, data, dims))
}

/// Projects and clusters every instance of the snapshot's timestamps.
pub fn assign_roles(snapshot: &Snapshot, spaces: &[&EmbeddingSpace], table: &InstanceTable, cfg: &RoleConfig) -> Result<SnapshotRoles> {
    let (instances, data, dims) = stack(spaces)?;
    let mut timestamps = snapshot.timestamp_indices.clone();
    timestamps.sort_unstable();
    if instances.is_empty() {
        return Ok(SnapshotRoles {
            snapshot: snapshot.index,
            timestamps,
            points: Vec::new(),
            clusters: Vec::new(),
            degenerate: false,
        });
    }
    let tsne_cfg = TsneConfig {
        seed: stage_seed(cfg.seed, "tsne", snapshot.index as u64),
        ..cfg.tsne
    };
    let coords = tsne::project(&data, dims, &tsne_cfg)?;
    let xm_cfg = XMeansConfig {
        seed: stage_seed(cfg.seed, "xmeans", snapshot.index as u64),
        ..cfg.xmeans
    };
    let clustering = if instances.len() < xm_cfg.k_min {
        // too few instances to split: one role
        xmeans::Clustering {
            labels: vec![0; instances.len()],
            centroids: vec![vec![0.0; 2]],
            degenerate: true,
        }
    } else {
        match cfg.cluster_on {
            ClusterInput::Projection => {
                let pts: Vec<&[f64]> = coords.iter().map(|c| c.as_slice()).collect();
                xmeans::xmeans(&pts, &xm_cfg)?
            }
            ClusterInput::Raw => {
                let pts: Vec<&[f64]> = data.chunks_exact(dims).collect();
                xmeans::xmeans(&pts, &xm_cfg)?
            }
        }
    };
    build_snapshot_roles(snapshot.index, timestamps, instances, coords, clustering.labels, clustering.degenerate, table)
}

/// Relabels clusters by size (ties by smallest member) and summarizes them.
fn build_snapshot_roles(
    snapshot: usize,
    timestamps: Vec<usize>,
    instances: Vec<Instance>,
    coords: Vec<[f64; 2]>,
    labels: Vec<u32>,
    degenerate: bool,
    table: &InstanceTable,
) -> Result<SnapshotRoles> {
    let mut groups: BTreeMap<u32, Vec<Instance>> = BTreeMap::new();
    for (inst, &l) in instances.iter().zip(&labels) {
        groups.entry(l).or_default().push(inst.clone());
    }
    let mut ordered: Vec<(u32, Vec<Instance>)> = groups.into_iter().collect();
    for g in ordered.iter_mut() {
        g.1.sort();
    }
    ordered.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then_with(|| a.1[0].cmp(&b.1[0])));
    let relabel: BTreeMap<u32, u32> = ordered.iter().enumerate().map(|(new, (old, _))| (*old, new as u32)).collect();
    let clusters = ordered
        .into_iter()
        .enumerate()
        .map(|(new, (_, members))| summarize_cluster(snapshot, new as u32, members, table))
        .collect::<Result<Vec<_>>>()?;
    let points = instances
        .into_iter()
        .zip(coords)
        .zip(labels)
        .map(|((inst, c), l)| ProjectedPoint {
            player: inst.player,
            timestamp: inst.timestamp,
            x: c[0],
            y: c[1],
            cluster: relabel[&l],
        })
        .collect();
    Ok(SnapshotRoles {
        snapshot,
        timestamps,
        points,
        clusters,
        degenerate,
    })
}

/// Baseline that clusters each timestamp on its own, so no cluster mixes
/// timestamps.
pub fn assign_roles_per_timestamp(snapshot: &Snapshot, spaces: &[&EmbeddingSpace], table: &InstanceTable, cfg: &RoleConfig) -> Result<Vec<RoleCluster>> {
    let mut out = Vec::new();
    for s in spaces {
        let single = Snapshot {
            index: snapshot.index,
            timestamp_indices: vec![s.timestamp],
            partial: false,
        };
        let c = RoleConfig {
            seed: stage_seed(cfg.seed, "per-timestamp", s.timestamp as u64),
            ..*cfg
        };
        out.extend(assign_roles(&single, &[*s], table, &c)?.clusters);
    }
    Ok(out)
}

/// Mean timestamp entropy over clusters.
pub fn mean_time_entropy(clusters: &[RoleCluster]) -> f64 {
    crate::stats::mean(&clusters.iter().map(|c| c.time_distribution.entropy).collect::<Vec<_>>())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct TimeDistributionRow {
    pub snapshot: usize,
    pub cluster_id: u32,
    pub boxplot: BoxStats,
    pub entropy: f64,
}

/// Boxplot statistics and entropy of member timestamps for every cluster.
pub fn time_distribution_report(clusters: &[RoleCluster]) -> Vec<TimeDistributionRow> {
    clusters
        .iter()
        .map(|c| TimeDistributionRow {
            snapshot: c.snapshot,
            cluster_id: c.cluster_id,
            boxplot: c.time_distribution.boxplot,
            entropy: c.time_distribution.entropy,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn members(ts: &[usize]) -> Vec<Instance> {
        ts.iter().enumerate().map(|(i, &t)| Instance::new(format!("p{i}"), t)).collect()
    }

    #[test]
    fn time_entropy_cases() {
        let t = InstanceTable::default();
        let one = summarize_cluster(0, 0, members(&[4, 4, 4]), &t).unwrap();
        assert_eq!(one.time_distribution.entropy, 0.0);
        let uniform = summarize_cluster(0, 0, members(&[0, 1, 2]), &t).unwrap();
        assert!((uniform.time_distribution.entropy - 3f64.ln()).abs() < 1e-12);
        let mixed = summarize_cluster(0, 0, members(&[0, 0, 1]), &t).unwrap();
        assert!((mixed.time_distribution.entropy - 0.6365).abs() < 1e-4);
        assert_eq!(mixed.time_distribution.counts.values().sum::<usize>(), 3);
    }

    #[test]
    fn relabel_by_size() {
        let inst = members(&[0, 0, 0, 0]);
        let r = build_snapshot_roles(0, vec![0], inst, vec![[0.0; 2]; 4], vec![7, 3, 3, 3], false, &InstanceTable::default()).unwrap();
        assert_eq!(r.clusters[0].size, 3);
        assert_eq!(r.clusters[1].size, 1);
        assert_eq!(r.points[0].cluster, 1);
    }
}
