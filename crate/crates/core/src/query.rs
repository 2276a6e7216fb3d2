//! Read-side views over a finished store, shaped for the explorer views.

use std::collections::{BTreeMap, BTreeSet};

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{embed_sequences, player_sequence, period_distributions, project_sequences, CompressedSequence, DocEmbedConfig, PeriodDistribution, SequencePoint, DEFAULT_BUCKET_MINUTES};
use crate::ingest::{EventType, InGameMetrics, InteractionEvent, PlayerId, Snapshot, Window};
use crate::metrics::{Metric, NodeMetricRow, OverviewStats};
use crate::pipeline::{self, PRIMARY_METHOD};
use crate::roles::flows::planet_ring;
use crate::roles::{FlowKind, Instance, InstanceTable, ProjectedPoint, RoleCluster, RoleRef, SnapshotRoles, TransitionFlow};
use crate::seed::stage_seed;
use crate::storyline::{build_rounds, layout, StorylineLayout, DEFAULT_SPACE, DEFAULT_SWEEPS};
use crate::store::Store;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct RingArc {
    pub to: RoleRef,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct RoleGlyph {
    pub cluster_id: u32,
    pub color_id: u32,
    pub size: usize,
    pub radar: BTreeMap<Metric, f64>,
    pub planet_ring: Vec<RingArc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SnapshotColumn {
    pub snapshot: usize,
    pub timestamps: Vec<usize>,
    pub partial: bool,
    pub degenerate: bool,
    pub roles: Vec<RoleGlyph>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SnapshotsView {
    pub snapshots: Vec<SnapshotColumn>,
    /// Transition flows between consecutive snapshots.
    pub flows: Vec<TransitionFlow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum FlowSide {
    Source,
    Target,
}

/// One polyline of the parallel coordinates plot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct PcpLine {
    pub player: PlayerId,
    pub timestamp: usize,
    pub side: FlowSide,
    pub in_flow: bool,
    /// Normalized metric values.
    pub values: BTreeMap<Metric, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct FlowDetail {
    pub flow: TransitionFlow,
    pub source_points: Vec<ProjectedPoint>,
    pub target_points: Vec<ProjectedPoint>,
    pub pcp: Vec<PcpLine>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct PlayerWindow {
    pub player: PlayerId,
    pub window: Window,
}

/// Event sequences of every player of a flow, embedded and projected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct FlowSequences {
    pub flow_id: String,
    pub windows: Vec<PlayerWindow>,
    pub tokens: BTreeMap<PlayerId, Vec<EventType>>,
    pub points: Vec<SequencePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct LassoRequest {
    /// Point ids, which are player ids in the sequence projection.
    pub ids: Vec<PlayerId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct LassoResult {
    pub flow_id: String,
    pub points: Vec<SequencePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct PlayerStoryline {
    pub player: PlayerId,
    pub snapshots: Vec<usize>,
    pub span: Window,
    pub layout: StorylineLayout,
    pub periods: Vec<PeriodDistribution>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct PlayerTimestamp {
    pub metrics: NodeMetricRow,
    pub ingame: Option<InGameMetrics>,
    /// Role at this timestamp, if the instance was clustered.
    pub role: Option<RoleRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct PlayerMetrics {
    pub player: PlayerId,
    pub timestamps: Vec<PlayerTimestamp>,
}

/// Everything the views need, loaded once from a store whose roles stage
/// has run.
#[derive(Debug, Clone)]
pub struct Dataset {
    store: Store,
    seed: u64,
    windows: Vec<Window>,
    snapshots: Vec<Snapshot>,
    roles: Vec<SnapshotRoles>,
    flows: Vec<TransitionFlow>,
    rows: Vec<NodeMetricRow>,
    table: InstanceTable,
    events: Vec<InteractionEvent>,
    overview: OverviewStats,
}

fn flow_file(id: &str) -> String {
    format!("events/{}.json", id.replace(':', "."))
}

impl Dataset {
    pub fn load(store: &Store) -> Result<Self> {
        let graphs = pipeline::load_graphs(store)?;
        let rows = pipeline::load_metric_rows(store)?;
        let roles = pipeline::load_roles(store, PRIMARY_METHOD)?;
        let seed = pipeline::stored_config(store)?.map(|c| c.seed).unwrap_or_default();
        Ok(Dataset {
            store: store.clone(),
            seed,
            windows: graphs.iter().map(|g| g.window).collect(),
            snapshots: pipeline::load_snapshots(store)?,
            flows: pipeline::load_flows(store, PRIMARY_METHOD)?,
            table: InstanceTable::new(&rows, &graphs),
            overview: store.read_json("overview.json")?,
            events: pipeline::load_events(store)?,
            roles,
            rows,
        })
    }

    pub fn overview(&self) -> &OverviewStats {
        &self.overview
    }

    pub fn flows(&self) -> &[TransitionFlow] {
        &self.flows
    }

    pub fn roles(&self) -> &[SnapshotRoles] {
        &self.roles
    }

    pub fn snapshots_view(&self) -> SnapshotsView {
        let snapshots = self
            .roles
            .iter()
            .map(|s| SnapshotColumn {
                snapshot: s.snapshot,
                timestamps: s.timestamps.clone(),
                partial: self.snapshots.get(s.snapshot).is_some_and(|x| x.partial),
                degenerate: s.degenerate,
                roles: s
                    .clusters
                    .iter()
                    .map(|c| RoleGlyph {
                        cluster_id: c.cluster_id,
                        color_id: c.color_id,
                        size: c.size,
                        radar: c.metric_means.clone(),
                        planet_ring: planet_ring(&self.flows, RoleRef::new(s.snapshot, c.cluster_id))
                            .into_iter()
                            .map(|(to, ratio)| RingArc { to, ratio })
                            .collect(),
                    })
                    .collect(),
            })
            .collect();
        SnapshotsView {
            snapshots,
            flows: self.flows.iter().filter(|f| f.kind == FlowKind::Transition).cloned().collect(),
        }
    }

    pub fn role(&self, r: RoleRef) -> Option<&RoleCluster> {
        self.roles.get(r.snapshot)?.cluster(r.cluster)
    }

    pub fn flow(&self, id: &str) -> Option<&TransitionFlow> {
        self.flows.iter().find(|f| f.id == id)
    }

    fn points_of(&self, r: RoleRef) -> Vec<ProjectedPoint> {
        self.roles
            .get(r.snapshot)
            .map(|s| s.points.iter().filter(|p| p.cluster == r.cluster).cloned().collect())
            .unwrap_or_default()
    }

    /// Both roles of a flow with their projected points and PCP lines.
    pub fn flow_detail(&self, from: RoleRef, to: RoleRef) -> Option<FlowDetail> {
        let flow = self.flows.iter().find(|f| f.from == from && f.to == to)?.clone();
        let (source_points, target_points) = (self.points_of(from), self.points_of(to));
        let moved: BTreeSet<&PlayerId> = flow.players.iter().collect();
        let line = |p: &ProjectedPoint, side: FlowSide| {
            let v = self.table.normalized(&Instance::new(p.player.clone(), p.timestamp)).unwrap_or([0.0; 6]);
            PcpLine {
                player: p.player.clone(),
                timestamp: p.timestamp,
                side,
                in_flow: moved.contains(&p.player),
                values: Metric::ALL.iter().copied().zip(v).collect(),
            }
        };
        let pcp = source_points
            .iter()
            .map(|p| line(p, FlowSide::Source))
            .chain(target_points.iter().map(|p| line(p, FlowSide::Target)))
            .collect();
        Some(FlowDetail {
            flow,
            source_points,
            target_points,
            pcp,
        })
    }

    fn window_of(&self, t: usize) -> Window {
        self.windows[t]
    }

    /// Time range of the role change of each player of `flow`.
    ///
    /// Transitions run from the window of the player's last active timestamp
    /// in the source snapshot to the end of its last one in the target.
    /// Interconversions cover the first pair of consecutive timestamps at
    /// which the player moved between the two roles.
    pub fn flow_windows(&self, flow: &TransitionFlow) -> Vec<PlayerWindow> {
        let last_in = |s: usize, player: &str| -> Option<usize> {
            self.roles.get(s)?.points.iter().filter(|p| p.player == player).map(|p| p.timestamp).max()
        };
        let mut out = Vec::with_capacity(flow.players.len());
        match flow.kind {
            FlowKind::Transition => {
                for p in &flow.players {
                    if let (Some(a), Some(b)) = (last_in(flow.from.snapshot, p), last_in(flow.to.snapshot, p)) {
                        out.push(PlayerWindow {
                            player: p.clone(),
                            window: Window {
                                start: self.window_of(a).start,
                                end: self.window_of(b).end,
                            },
                        });
                    }
                }
            }
            FlowKind::Interconversion => {
                let Some(s) = self.roles.get(flow.from.snapshot) else { return out };
                let mut by_time: BTreeMap<usize, BTreeMap<&PlayerId, u32>> = BTreeMap::new();
                for p in &s.points {
                    by_time.entry(p.timestamp).or_default().insert(&p.player, p.cluster);
                }
                let steps: Vec<(&usize, &BTreeMap<&PlayerId, u32>)> = by_time.iter().collect();
                for p in &flow.players {
                    let step = steps.windows(2).find(|w| w[0].1.get(p) == Some(&flow.from.cluster) && w[1].1.get(p) == Some(&flow.to.cluster));
                    if let Some(w) = step {
                        out.push(PlayerWindow {
                            player: p.clone(),
                            window: Window {
                                start: self.window_of(*w[0].0).start,
                                end: self.window_of(*w[1].0).end,
                            },
                        });
                    }
                }
            }
        }
        out
    }

    /// Compressed sequences of a flow's players, embedded and projected.
    pub fn compute_flow_sequences(&self, flow: &TransitionFlow) -> Result<FlowSequences> {
        let windows = self.flow_windows(flow);
        let seqs: Vec<CompressedSequence> = windows
            .iter()
            .map(|w| player_sequence(&w.player, &self.events, w.window))
            .collect();
        let seed = stage_seed(self.seed, &format!("events:{}", flow.id), 0);
        let cfg = DocEmbedConfig { seed, ..DocEmbedConfig::default() };
        let emb = embed_sequences(&seqs, &cfg)?;
        let points = project_sequences(&seqs, &emb, seed)?;
        Ok(FlowSequences {
            flow_id: flow.id.clone(),
            tokens: seqs.iter().map(|s| (s.player.clone(), s.tokens.clone())).collect(),
            windows,
            points,
        })
    }

    /// Flow sequences, computed on first request and kept in the store.
    pub fn flow_sequences(&self, id: &str) -> Result<FlowSequences> {
        let flow = self.flow(id).ok_or_else(|| Error::invalid(format!("unknown flow `{id}`")))?;
        let path = flow_file(id);
        if self.store.exists(&path) {
            return self.store.read_json(&path);
        }
        let seqs = self.compute_flow_sequences(flow)?;
        self.store.write_json(&path, &seqs)?;
        Ok(seqs)
    }

    /// Sequence points of the lassoed players. Ids outside the flow are ignored.
    pub fn lasso(&self, id: &str, req: &LassoRequest) -> Result<LassoResult> {
        let wanted: BTreeSet<&PlayerId> = req.ids.iter().collect();
        let points = if wanted.is_empty() {
            Vec::new()
        } else {
            self.flow_sequences(id)?.points.into_iter().filter(|p| wanted.contains(&p.player)).collect()
        };
        Ok(LassoResult { flow_id: id.to_owned(), points })
    }

    /// Storyline of `player` over snapshot `s` and the one after it.
    pub fn storyline(&self, player: &str, s: usize) -> Result<PlayerStoryline> {
        if s >= self.snapshots.len() {
            return Err(Error::invalid(format!("unknown snapshot {s}")));
        }
        let span: Vec<(usize, Window)> = self.snapshots[s..self.snapshots.len().min(s + 2)]
            .iter()
            .filter_map(|snap| {
                let first = *snap.timestamp_indices.first()?;
                let last = *snap.timestamp_indices.last()?;
                Some((snap.index, Window {
                    start: self.window_of(first).start,
                    end: self.window_of(last).end,
                }))
            })
            .collect();
        let whole = match (span.first(), span.last()) {
            (Some(a), Some(b)) => Window { start: a.1.start, end: b.1.end },
            _ => Window { start: 0, end: 0 },
        };
        let rounds = build_rounds(player, &self.events, DEFAULT_BUCKET_MINUTES, &span)?;
        Ok(PlayerStoryline {
            player: player.to_owned(),
            snapshots: span.iter().map(|w| w.0).collect(),
            span: whole,
            layout: layout(&rounds, DEFAULT_SPACE, DEFAULT_SWEEPS),
            periods: period_distributions(player, &self.events, DEFAULT_BUCKET_MINUTES, Some(whole))?,
        })
    }

    pub fn player_metrics(&self, player: &str) -> Result<PlayerMetrics> {
        let mut roles: BTreeMap<usize, RoleRef> = BTreeMap::new();
        for s in &self.roles {
            for p in s.points.iter().filter(|p| p.player == player) {
                roles.insert(p.timestamp, RoleRef::new(s.snapshot, p.cluster));
            }
        }
        let timestamps: Vec<PlayerTimestamp> = self
            .rows
            .iter()
            .filter(|r| r.player == player)
            .map(|r| PlayerTimestamp {
                ingame: self.table.ingame.get(&Instance::new(player, r.timestamp)).copied(),
                role: roles.get(&r.timestamp).copied(),
                metrics: r.clone(),
            })
            .collect();
        if timestamps.is_empty() {
            return Err(Error::UnknownPlayer(player.to_owned()));
        }
        Ok(PlayerMetrics {
            player: player.to_owned(),
            timestamps,
        })
    }
}
