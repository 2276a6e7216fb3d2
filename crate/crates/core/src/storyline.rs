//! Narrative layout of one player's interactions: rounds along x, one line
//! per participant, ordered by barycenter sweeps to reduce crossings.

use std::collections::{BTreeMap, BTreeSet};

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::bucket_of;
use crate::ingest::{InteractionEvent, PlayerId, Window};

pub const DEFAULT_SPACE: f64 = 30.0;
pub const DEFAULT_SWEEPS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct InteractionRound {
    pub round_id: usize,
    /// Wall-clock bucket index.
    pub bucket: i64,
    pub start: i64,
    /// Ego first, then counterparties in order of first appearance.
    pub participants: Vec<PlayerId>,
    pub snapshot: usize,
}

/// One round per occupied bucket of ego-incident events. `span` lists the
/// snapshots to cover with their time ranges; an empty span keeps all
/// events and tags them snapshot 0.
pub fn build_rounds(ego: &str, events: &[InteractionEvent], bucket_minutes: i64, span: &[(usize, Window)]) -> Result<Vec<InteractionRound>> {
    if bucket_minutes <= 0 {
        return Err(Error::invalid("bucket_minutes must be positive"));
    }
    if !events.iter().any(|e| e.involves(ego)) {
        return Err(Error::UnknownPlayer(ego.to_owned()));
    }
    let snapshot_of = |ts: i64| -> Option<usize> {
        if span.is_empty() {
            return Some(0);
        }
        span.iter().find(|(_, w)| w.contains(ts)).map(|(s, _)| *s)
    };
    let mut buckets: BTreeMap<i64, (usize, Vec<PlayerId>)> = BTreeMap::new();
    for e in events.iter().filter(|e| e.involves(ego)) {
        let Some(snapshot) = snapshot_of(e.occurred_at) else { continue };
        let entry = buckets
            .entry(bucket_of(e.occurred_at, bucket_minutes))
            .or_insert_with(|| (snapshot, vec![ego.to_owned()]));
        if let Some(other) = e.counterparty(ego) {
            if !entry.1.iter().any(|p| p == other) {
                entry.1.push(other.to_owned());
            }
        }
    }
    Ok(buckets
        .into_iter()
        .enumerate()
        .map(|(round_id, (bucket, (snapshot, participants)))| InteractionRound {
            round_id,
            bucket,
            start: bucket * bucket_minutes * 60,
            participants,
            snapshot,
        })
        .collect())
}

/// `temp_y(p_k) = k * space` for players in order of first appearance.
pub fn initial_slots(players: &[PlayerId], space: f64) -> BTreeMap<PlayerId, f64> {
    let mut out = BTreeMap::new();
    for p in players {
        let k = out.len();
        out.entry(p.clone()).or_insert(k as f64 * space);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct RoundPlacement {
    pub round_id: usize,
    pub x: f64,
    pub y: f64,
    /// Participants top to bottom with their y.
    pub slots: Vec<(PlayerId, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Curve {
    pub player: PlayerId,
    /// `(x, y)` through consecutive rounds the player takes part in.
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct StorylineLayout {
    pub space: f64,
    pub rounds: Vec<RoundPlacement>,
    pub curves: Vec<Curve>,
    pub seed_crossings: usize,
    pub crossings: usize,
}

/// Per round, participants in top-to-bottom order with their y.
type Columns = Vec<Vec<(PlayerId, f64)>>;

/// Pairs of lines swapping order between adjacent rounds.
pub fn count_crossings(columns: &[Vec<(PlayerId, f64)>]) -> usize {
    let mut total = 0;
    for w in columns.windows(2) {
        let next: BTreeMap<&PlayerId, f64> = w[1].iter().map(|(p, y)| (p, *y)).collect();
        let shared: Vec<(f64, f64)> = w[0].iter().filter_map(|(p, y)| next.get(p).map(|y2| (*y, *y2))).collect();
        for i in 0..shared.len() {
            for j in i + 1..shared.len() {
                if (shared[i].0 - shared[j].0) * (shared[i].1 - shared[j].1) < 0.0 {
                    total += 1;
                }
            }
        }
    }
    total
}

/// Reorders `columns[r]` by the mean y of its players in `columns[r_ref]`,
/// reusing the round's existing slot positions.
fn reorder(columns: &mut Columns, r: usize, r_ref: usize) {
    let reference: BTreeMap<PlayerId, f64> = columns[r_ref].iter().cloned().collect();
    let col = &mut columns[r];
    let positions: Vec<f64> = col.iter().map(|c| c.1).collect();
    let mut keyed: Vec<(f64, f64, PlayerId)> = col.iter().map(|(p, y)| (reference.get(p).copied().unwrap_or(*y), *y, p.clone())).collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    *col = keyed.into_iter().zip(positions).map(|((_, _, p), y)| (p, y)).collect();
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Seeds every round with `initial_slots`, runs `sweeps` alternating
/// barycenter passes (a pass is kept only if it does not add crossings),
/// places each round at the median of its slots, then shifts consecutive
/// dense rounds that share no player apart by at least `space`.
pub fn layout(rounds: &[InteractionRound], space: f64, sweeps: usize) -> StorylineLayout {
    let order: Vec<PlayerId> = rounds.iter().flat_map(|r| r.participants.iter().cloned()).collect();
    let temp = initial_slots(&order, space);
    let mut columns: Columns = rounds
        .iter()
        .map(|r| {
            let mut c: Vec<(PlayerId, f64)> = r.participants.iter().map(|p| (p.clone(), temp[p])).collect();
            c.sort_by(|a, b| a.1.total_cmp(&b.1));
            c
        })
        .collect();
    let seed_crossings = count_crossings(&columns);
    let mut crossings = seed_crossings;

    for s in 0..sweeps {
        let mut trial = columns.clone();
        let n = trial.len();
        if s % 2 == 0 {
            for r in 1..n {
                reorder(&mut trial, r, r - 1);
            }
        } else {
            for r in (0..n.saturating_sub(1)).rev() {
                reorder(&mut trial, r, r + 1);
            }
        }
        let c = count_crossings(&trial);
        if c <= crossings {
            crossings = c;
            columns = trial;
        }
    }

    let mut ys: Vec<f64> = columns
        .iter()
        .map(|c| {
            let mut v: Vec<f64> = c.iter().map(|s| s.1).collect();
            v.sort_by(f64::total_cmp);
            median(&v)
        })
        .collect();

    // dense rounds: size in the top quarter and at least three players
    let mut sizes: Vec<usize> = columns.iter().map(Vec::len).collect();
    sizes.sort_unstable();
    let threshold = sizes.get(sizes.len() * 3 / 4).copied().unwrap_or(0).max(3);
    let dense: Vec<usize> = (0..columns.len()).filter(|&r| columns[r].len() >= threshold).collect();
    for w in dense.windows(2) {
        // shifting a round that shares a player would bend that player's line
        let (a, b) = (w[0], w[1]);
        let gap = ys[b] - ys[a];
        let linked = columns[a].iter().any(|(p, _)| columns[b].iter().any(|(q, _)| p == q));
        if !linked && gap.abs() < space {
            let shift = if gap >= 0.0 { space - gap } else { -space - gap };
            ys[b] += shift;
            for slot in columns[b].iter_mut() {
                slot.1 += shift;
            }
        }
    }

    let placements: Vec<RoundPlacement> = rounds
        .iter()
        .zip(columns)
        .zip(&ys)
        .map(|((r, slots), &y)| RoundPlacement {
            round_id: r.round_id,
            x: r.round_id as f64,
            y,
            slots,
        })
        .collect();

    let mut curves = Vec::new();
    let players: BTreeSet<&PlayerId> = order.iter().collect();
    for p in players {
        let mut current: Vec<(f64, f64)> = Vec::new();
        let mut last: Option<usize> = None;
        for (i, r) in placements.iter().enumerate() {
            if let Some((_, y)) = r.slots.iter().find(|s| &s.0 == p) {
                if last.is_some_and(|l| l + 1 != i) && !current.is_empty() {
                    curves.push(Curve {
                        player: p.clone(),
                        points: std::mem::take(&mut current),
                    });
                }
                current.push((r.x, *y));
                last = Some(i);
            }
        }
        if !current.is_empty() {
            curves.push(Curve { player: p.clone(), points: current });
        }
    }

    StorylineLayout {
        space,
        rounds: placements,
        curves,
        seed_crossings,
        crossings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::EventType;

    fn round(id: usize, players: &[&str]) -> InteractionRound {
        InteractionRound {
            round_id: id,
            bucket: id as i64,
            start: id as i64 * 600,
            participants: players.iter().map(|p| p.to_string()).collect(),
            snapshot: 0,
        }
    }

    #[test]
    fn slot_formula() {
        let s = initial_slots(&["a".into(), "b".into(), "c".into(), "a".into()], 30.0);
        assert_eq!(s["a"], 0.0);
        assert_eq!(s["c"], 60.0);
        assert_eq!(s.len(), 3);
    }

    #[test]
    fn rounds_from_events() {
        assert!(build_rounds("ego", &[], 10, &[]).is_err());
        let ev = [
            InteractionEvent::new(0, "ego", Some("p2"), EventType::Chatting),
            InteractionEvent::new(750, "p3", Some("ego"), EventType::Battle),
            InteractionEvent::new(1500, "ego", None, EventType::Task),
            InteractionEvent::new(1510, "x", Some("y"), EventType::Task),
        ];
        let r = build_rounds("ego", &ev, 10, &[]).unwrap();
        assert_eq!(r.iter().map(|r| r.bucket).collect::<Vec<_>>(), vec![0, 1, 2]);
        assert_eq!(r[0].participants, vec!["ego", "p2"]);
        assert_eq!(r[2].participants, vec!["ego"]);
    }

    #[test]
    fn straight_lines_no_crossings() {
        let l = layout(&[round(0, &["a", "b", "c"]), round(1, &["a", "b", "c"])], 30.0, 4);
        assert_eq!(l.crossings, 0);
        for c in &l.curves {
            assert_eq!(c.points[0].1, c.points[1].1);
        }
    }

    #[test]
    fn sweep_removes_crossing() {
        let rounds = [round(0, &["a", "b"]), round(1, &["c", "b", "a"])];
        let l = layout(&rounds, 30.0, 4);
        assert_eq!(l.seed_crossings, 0);
        let rounds = [round(0, &["a", "x", "b"]), round(1, &["b", "y", "a"])];
        let mut cols: Columns = vec![vec![("a".into(), 0.0), ("b".into(), 30.0)], vec![("b".into(), 0.0), ("a".into(), 30.0)]];
        assert_eq!(count_crossings(&cols), 1);
        reorder(&mut cols, 1, 0);
        assert_eq!(count_crossings(&cols), 0);
        let l = layout(&rounds, 30.0, 4);
        assert!(l.crossings <= l.seed_crossings);
    }

    #[test]
    fn gaps_split_curves() {
        let l = layout(&[round(0, &["a", "b"]), round(1, &["a"]), round(2, &["a", "b"])], 30.0, 4);
        let b: Vec<_> = l.curves.iter().filter(|c| c.player == "b").collect();
        assert_eq!(b.len(), 2);
    }
}
