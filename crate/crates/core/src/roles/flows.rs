//! Player movement between roles: interconversion between consecutive
//! timestamps of one snapshot, transition between consecutive snapshots.

use std::collections::{BTreeMap, BTreeSet};

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::SnapshotRoles;
use crate::ingest::PlayerId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum FlowKind {
    Interconversion,
    Transition,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema)]
pub struct RoleRef {
    pub snapshot: usize,
    pub cluster: u32,
}

impl RoleRef {
    pub fn new(snapshot: usize, cluster: u32) -> Self {
        RoleRef { snapshot, cluster }
    }
}

impl std::fmt::Display for RoleRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.snapshot, self.cluster)
    }
}

impl std::str::FromStr for RoleRef {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s.split_once(':').ok_or_else(|| format!("expected `snapshot:cluster`, got `{s}`"))?;
        Ok(RoleRef {
            snapshot: a.trim().parse().map_err(|_| format!("bad snapshot in `{s}`"))?,
            cluster: b.trim().parse().map_err(|_| format!("bad cluster in `{s}`"))?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct TransitionFlow {
    /// `<from>-<to>`, e.g. `0:1-1:0`.
    pub id: String,
    pub kind: FlowKind,
    pub from: RoleRef,
    pub to: RoleRef,
    pub players: Vec<PlayerId>,
    pub size: usize,
    /// Distinct players of the source role the ratio is taken over.
    pub source_size: usize,
    pub ratio: f64,
}

pub fn flow_id(from: RoleRef, to: RoleRef) -> String {
    format!("{from}-{to}")
}

/// Parses a flow id back into its endpoints.
pub fn parse_flow_id(id: &str) -> Option<(RoleRef, RoleRef)> {
    let (a, b) = id.split_once('-')?;
    Some((a.parse().ok()?, b.parse().ok()?))
}

fn make_flow(kind: FlowKind, from: RoleRef, to: RoleRef, players: BTreeSet<PlayerId>, source_size: usize) -> TransitionFlow {
    let size = players.len();
    TransitionFlow {
        id: flow_id(from, to),
        kind,
        from,
        to,
        players: players.into_iter().collect(),
        size,
        source_size,
        ratio: size as f64 / source_size as f64,
    }
}

/// Role of each player at its last active timestamp of the snapshot.
pub fn snapshot_roles(s: &SnapshotRoles) -> BTreeMap<PlayerId, u32> {
    let mut last: BTreeMap<PlayerId, (usize, u32)> = BTreeMap::new();
    for p in &s.points {
        let e = last.entry(p.player.clone()).or_insert((p.timestamp, p.cluster));
        if p.timestamp >= e.0 {
            *e = (p.timestamp, p.cluster);
        }
    }
    last.into_iter().map(|(k, (_, c))| (k, c)).collect()
}

/// Interconversion flows of every snapshot, then transition flows between
/// consecutive snapshots. Self-flows (role kept) are included.
pub fn compute_flows(snapshots: &[SnapshotRoles]) -> Vec<TransitionFlow> {
    let mut out = Vec::new();
    for s in snapshots {
        // distinct players per cluster
        let mut members: BTreeMap<u32, BTreeSet<&PlayerId>> = BTreeMap::new();
        let mut by_time: BTreeMap<usize, BTreeMap<&PlayerId, u32>> = BTreeMap::new();
        for p in &s.points {
            members.entry(p.cluster).or_default().insert(&p.player);
            by_time.entry(p.timestamp).or_default().insert(&p.player, p.cluster);
        }
        let mut moves: BTreeMap<(u32, u32), BTreeSet<PlayerId>> = BTreeMap::new();
        let steps: Vec<_> = by_time.values().collect();
        for w in steps.windows(2) {
            for (player, &a) in w[0] {
                if let Some(&b) = w[1].get(player) {
                    moves.entry((a, b)).or_default().insert((*player).clone());
                }
            }
        }
        for ((a, b), players) in moves {
            let source = members[&a].len();
            out.push(make_flow(FlowKind::Interconversion, RoleRef::new(s.snapshot, a), RoleRef::new(s.snapshot, b), players, source));
        }
    }
    for w in snapshots.windows(2) {
        let (before, after) = (snapshot_roles(&w[0]), snapshot_roles(&w[1]));
        let mut sizes: BTreeMap<u32, usize> = BTreeMap::new();
        for &c in before.values() {
            *sizes.entry(c).or_default() += 1;
        }
        let mut moves: BTreeMap<(u32, u32), BTreeSet<PlayerId>> = BTreeMap::new();
        for (player, &a) in &before {
            if let Some(&b) = after.get(player) {
                moves.entry((a, b)).or_default().insert(player.clone());
            }
        }
        for ((a, b), players) in moves {
            out.push(make_flow(FlowKind::Transition, RoleRef::new(w[0].snapshot, a), RoleRef::new(w[1].snapshot, b), players, sizes[&a]));
        }
    }
    out
}

/// Interconversion ratio from each role to every other role of its snapshot.
pub fn planet_ring(flows: &[TransitionFlow], role: RoleRef) -> Vec<(RoleRef, f64)> {
    flows
        .iter()
        .filter(|f| f.kind == FlowKind::Interconversion && f.from == role && f.to != role)
        .map(|f| (f.to, f.ratio))
        .collect()
}
