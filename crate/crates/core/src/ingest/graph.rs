use std::collections::{BTreeMap, BTreeSet, HashMap};

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::{default_rules, intimacy_delta, EventType, InteractionEvent, IntimacyRule, PlayerId, StatusRecord};
use crate::error::{Error, Result};

pub const DEFAULT_WINDOW_HOURS: f64 = 6.0;

/// Monday 1970-01-05 00:00 UTC.
pub const DEFAULT_WEEK_ANCHOR_SECS: i64 = 4 * 86_400;

const WEEK_SECS: i64 = 7 * 86_400;

/// Half-open `[start, end)` interval in epoch seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct Window {
    pub start: i64,
    pub end: i64,
}

impl Window {
    pub fn contains(&self, ts: i64) -> bool {
        self.start <= ts && ts < self.end
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct InGameMetrics {
    pub cash: f64,
    pub grade: f64,
    /// Total intimacy the player holds across all partners.
    pub intimacy_total: f64,
    pub combat_score: f64,
}

/// Social graph of the players active in one window. Edge keys are stored
/// with the lexicographically smaller id first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(into = "TimestampGraphFile", try_from = "TimestampGraphFile")]
pub struct TimestampGraph {
    pub index: usize,
    pub window: Window,
    pub nodes: BTreeSet<PlayerId>,
    pub edges: BTreeMap<(PlayerId, PlayerId), f64>,
    pub ingame: BTreeMap<PlayerId, InGameMetrics>,
}

/// On-disk layout of `timestamps/<t>.json`.
#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
pub struct TimestampGraphFile {
    pub index: usize,
    pub window: Window,
    pub nodes: Vec<PlayerId>,
    pub edges: Vec<(PlayerId, PlayerId, f64)>,
    pub ingame: BTreeMap<PlayerId, InGameMetrics>,
}

impl From<TimestampGraph> for TimestampGraphFile {
    fn from(g: TimestampGraph) -> Self {
        TimestampGraphFile {
            index: g.index,
            window: g.window,
            nodes: g.nodes.into_iter().collect(),
            edges: g.edges.into_iter().map(|((a, b), w)| (a, b, w)).collect(),
            ingame: g.ingame,
        }
    }
}

impl TryFrom<TimestampGraphFile> for TimestampGraph {
    type Error = String;

    fn try_from(f: TimestampGraphFile) -> std::result::Result<Self, Self::Error> {
        let nodes: BTreeSet<_> = f.nodes.into_iter().collect();
        let mut edges = BTreeMap::new();
        for (a, b, w) in f.edges {
            if a == b || !nodes.contains(&a) || !nodes.contains(&b) {
                return Err(format!("edge ({a}, {b}) has an endpoint outside the node set"));
            }
            let key = if a < b { (a, b) } else { (b, a) };
            edges.insert(key, w);
        }
        Ok(TimestampGraph {
            index: f.index,
            window: f.window,
            nodes,
            edges,
            ingame: f.ingame,
        })
    }
}

impl TimestampGraph {
    pub fn empty(index: usize, window: Window) -> Self {
        TimestampGraph {
            index,
            window,
            nodes: BTreeSet::new(),
            edges: BTreeMap::new(),
            ingame: BTreeMap::new(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn weight(&self, a: &str, b: &str) -> Option<f64> {
        let key = if a < b { (a.to_owned(), b.to_owned()) } else { (b.to_owned(), a.to_owned()) };
        self.edges.get(&key).copied()
    }

    /// Builds a graph from an edge list, adding endpoints as nodes.
    pub fn from_edges<'a>(index: usize, edges: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        let mut g = TimestampGraph::empty(index, Window { start: 0, end: 0 });
        for (a, b) in edges {
            g.nodes.insert(a.to_owned());
            g.nodes.insert(b.to_owned());
            let key = if a < b { (a.to_owned(), b.to_owned()) } else { (b.to_owned(), a.to_owned()) };
            g.edges.insert(key, 1.0);
        }
        g
    }
}

/// Group of consecutive timestamp graphs shown as one column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct Snapshot {
    pub index: usize,
    pub timestamp_indices: Vec<usize>,
    /// True for a trailing group with fewer than the requested timestamps.
    pub partial: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
pub struct IngestConfig {
    pub window_hours: f64,
    /// Epoch second at which weekly intimacy caps reset.
    pub week_anchor_secs: i64,
    pub rules: Vec<IntimacyRule>,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            window_hours: DEFAULT_WINDOW_HOURS,
            week_anchor_secs: DEFAULT_WEEK_ANCHOR_SECS,
            rules: default_rules(),
        }
    }
}

impl IngestConfig {
    pub fn window_secs(&self) -> Result<i64> {
        if !(self.window_hours > 0.0) || !self.window_hours.is_finite() {
            return Err(Error::invalid(format!("window_hours must be positive, got {}", self.window_hours)));
        }
        Ok(((self.window_hours * 3600.0).round() as i64).max(1))
    }
}

#[derive(Debug, Clone)]
pub struct IngestOutput {
    pub graphs: Vec<TimestampGraph>,
    /// Final cumulative intimacy per pair.
    pub pair_intimacy: BTreeMap<(PlayerId, PlayerId), f64>,
    /// Sum of every delta applied while replaying the log.
    pub applied_total: f64,
}

/// Builds one graph per window with the default intimacy table.
pub fn build_timestamp_graphs(events: &[InteractionEvent], window_hours: f64) -> Result<Vec<TimestampGraph>> {
    let config = IngestConfig {
        window_hours,
        ..IngestConfig::default()
    };
    Ok(build_timestamp_graphs_with(events, &[], &config)?.graphs)
}

/// Replays `events` (sorted by time) and emits one graph per window from the
/// first to the last event. Windows are aligned to multiples of the window
/// length. Edge weights are the pair's cumulative intimacy at window end and
/// are present whenever both players are active in the window.
pub fn build_timestamp_graphs_with(
    events: &[InteractionEvent],
    status: &[StatusRecord],
    config: &IngestConfig,
) -> Result<IngestOutput> {
    let window = config.window_secs()?;
    if events.windows(2).any(|w| w[0].occurred_at > w[1].occurred_at) {
        return Err(Error::invalid("events must be sorted by occurred_at"));
    }
    let (Some(first), Some(last)) = (events.first(), events.last()) else {
        return Ok(IngestOutput {
            graphs: Vec::new(),
            pair_intimacy: BTreeMap::new(),
            applied_total: 0.0,
        });
    };
    let origin = first.occurred_at.div_euclid(window) * window;
    let n_windows = ((last.occurred_at - origin) / window + 1) as usize;

    let mut pair_total: BTreeMap<(PlayerId, PlayerId), f64> = BTreeMap::new();
    let mut weekly: HashMap<(PlayerId, PlayerId, EventType, i64), f64> = HashMap::new();
    let mut latest_status: HashMap<&str, &StatusRecord> = HashMap::new();
    let mut status_iter = status.iter().peekable();
    let mut applied_total = 0.0;
    let mut graphs = Vec::with_capacity(n_windows);
    let mut cursor = 0usize;

    for t in 0..n_windows {
        let win = Window {
            start: origin + t as i64 * window,
            end: origin + (t as i64 + 1) * window,
        };
        let mut active: BTreeSet<PlayerId> = BTreeSet::new();
        while cursor < events.len() && events[cursor].occurred_at < win.end {
            let ev = &events[cursor];
            cursor += 1;
            active.insert(ev.actor.clone());
            let Some((a, b)) = ev.pair() else { continue };
            active.insert(ev.target.clone().unwrap_or_default());
            let week = (ev.occurred_at - config.week_anchor_secs).div_euclid(WEEK_SECS);
            let cap_key = (a.to_owned(), b.to_owned(), ev.event_type, week);
            let acc = weekly.entry(cap_key).or_insert(0.0);
            let delta = intimacy_delta(ev, &config.rules, *acc)?;
            *acc += delta;
            applied_total += delta;
            *pair_total.entry((a.to_owned(), b.to_owned())).or_insert(0.0) += delta;
        }
        while let Some(rec) = status_iter.next_if(|r| r.ts < win.end) {
            latest_status.insert(rec.player.as_str(), rec);
        }

        let mut g = TimestampGraph::empty(t, win);
        let mut held: HashMap<&str, f64> = HashMap::new();
        for ((a, b), &w) in &pair_total {
            *held.entry(a.as_str()).or_insert(0.0) += w;
            *held.entry(b.as_str()).or_insert(0.0) += w;
            if w > 0.0 && active.contains(a) && active.contains(b) {
                g.edges.insert((a.clone(), b.clone()), w);
            }
        }
        for p in &active {
            let s = latest_status.get(p.as_str());
            g.ingame.insert(
                p.clone(),
                InGameMetrics {
                    cash: s.map_or(0.0, |s| s.cash),
                    grade: s.map_or(0.0, |s| s.grade),
                    intimacy_total: held.get(p.as_str()).copied().unwrap_or(0.0),
                    combat_score: s.map_or(0.0, |s| s.combat),
                },
            );
        }
        g.nodes = active;
        graphs.push(g);
    }

    Ok(IngestOutput {
        graphs,
        pair_intimacy: pair_total,
        applied_total,
    })
}

/// Consecutive non-overlapping groups of `n_per_snapshot` timestamps.
pub fn group_snapshots(graph_count: usize, n_per_snapshot: usize) -> Result<Vec<Snapshot>> {
    if n_per_snapshot == 0 {
        return Err(Error::invalid("n_per_snapshot must be at least 1"));
    }
    Ok((0..graph_count)
        .step_by(n_per_snapshot)
        .enumerate()
        .map(|(index, start)| {
            let end = (start + n_per_snapshot).min(graph_count);
            Snapshot {
                index,
                timestamp_indices: (start..end).collect(),
                partial: end - start < n_per_snapshot,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    const H: i64 = 3600;

    fn chat(ts: i64, a: &str, b: &str) -> InteractionEvent {
        InteractionEvent::new(ts, a, Some(b), EventType::Chatting)
    }

    fn solo(ts: i64, a: &str) -> InteractionEvent {
        InteractionEvent::new(ts, a, None, EventType::KillingMonster)
    }

    #[test]
    fn five_chats_sum() {
        let events: Vec<_> = (0..5).map(|i| chat(i * 60, "p1", "p2")).collect();
        let graphs = build_timestamp_graphs(&events, 6.0).unwrap();
        assert_eq!(graphs.len(), 1);
        assert_eq!(graphs[0].weight("p1", "p2"), Some(10.0));
        assert_eq!(graphs[0].weight("p2", "p1"), Some(10.0));
    }

    #[test]
    fn intimacy_restored_when_player_returns() {
        let events = vec![
            chat(0, "p1", "p2"),
            solo(6 * H + 10, "p2"),
            solo(12 * H + 10, "p1"),
            solo(12 * H + 20, "p2"),
        ];
        let graphs = build_timestamp_graphs(&events, 6.0).unwrap();
        assert_eq!(graphs.len(), 3);
        assert!(!graphs[1].nodes.contains("p1"));
        assert!(graphs[1].edges.is_empty());
        assert_eq!(graphs[2].weight("p1", "p2"), Some(2.0));
    }

    #[test]
    fn empty_window_keeps_indexing() {
        let events = vec![chat(0, "a", "b"), chat(13 * H, "a", "b")];
        let graphs = build_timestamp_graphs(&events, 6.0).unwrap();
        assert_eq!(graphs.len(), 3);
        assert_eq!(graphs[1].node_count(), 0);
        assert_eq!(graphs[1].index, 1);
        assert_eq!(graphs[2].weight("a", "b"), Some(4.0));
    }

    #[test]
    fn window_hours_validated() {
        assert!(build_timestamp_graphs(&[chat(0, "a", "b")], 0.0).is_err());
        assert!(build_timestamp_graphs(&[chat(0, "a", "b")], -1.0).is_err());
    }

    #[test]
    fn unsorted_rejected() {
        assert!(build_timestamp_graphs(&[chat(10, "a", "b"), chat(0, "a", "b")], 6.0).is_err());
    }

    #[test]
    fn weekly_cap_resets() {
        // 106 chats in one week saturate the 210 cap; the next week starts fresh.
        let monday = DEFAULT_WEEK_ANCHOR_SECS + 52 * WEEK_SECS;
        let mut events: Vec<_> = (0..106).map(|i| chat(monday + i, "a", "b")).collect();
        events.push(chat(monday + WEEK_SECS, "a", "b"));
        let out = build_timestamp_graphs_with(&events, &[], &IngestConfig::default()).unwrap();
        assert_eq!(out.pair_intimacy[&("a".to_owned(), "b".to_owned())], 212.0);
        assert_eq!(out.graphs[0].weight("a", "b"), Some(210.0));
    }

    #[test]
    fn ingame_metrics_from_status() {
        let events = vec![chat(0, "a", "b"), solo(7 * H, "a")];
        let status = vec![
            StatusRecord { ts: 5, player: "a".into(), cash: 10.0, grade: 3.0, combat: 77.0 },
            StatusRecord { ts: 6 * H + 1, player: "a".into(), cash: 20.0, grade: 4.0, combat: 80.0 },
        ];
        let out = build_timestamp_graphs_with(&events, &status, &IngestConfig::default()).unwrap();
        let m0 = out.graphs[0].ingame["a"];
        assert_eq!((m0.cash, m0.grade, m0.combat_score, m0.intimacy_total), (10.0, 3.0, 77.0, 2.0));
        assert_eq!(out.graphs[1].ingame["a"].cash, 20.0);
        assert_eq!(out.graphs[0].ingame["b"], InGameMetrics { intimacy_total: 2.0, ..Default::default() });
    }

    #[test]
    fn snapshots() {
        assert_eq!(group_snapshots(6, 3).unwrap().len(), 2);
        let s = group_snapshots(7, 3).unwrap();
        assert_eq!(s.len(), 3);
        assert!(s[2].partial && !s[1].partial);
        assert_eq!(s[2].timestamp_indices, vec![6]);
        assert!(group_snapshots(0, 3).unwrap().is_empty());
        assert!(group_snapshots(3, 0).is_err());
    }

    #[test]
    fn file_round_trip() {
        let g = build_timestamp_graphs(&[chat(0, "b", "a"), solo(1, "c")], 6.0).unwrap().remove(0);
        let json = serde_json::to_string(&g).unwrap();
        assert!(json.contains(r#""edges":[["a","b",2.0]]"#));
        let back: TimestampGraph = serde_json::from_str(&json).unwrap();
        assert_eq!(back, g);
    }
}
