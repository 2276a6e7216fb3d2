use std::collections::BTreeMap;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::{Metric, NodeMetricRow};
use crate::ingest::{PlayerId, TimestampGraph};
use crate::stats::Histogram;

pub const OVERVIEW_BINS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct TimestampSummary {
    pub index: usize,
    pub node_count: usize,
    pub edge_count: usize,
    /// Share of active players whose role differs from their role at the
    /// previous timestamp, in percent.
    pub transition_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct OverviewStats {
    pub timestamps: Vec<TimestampSummary>,
    pub metric_histograms: BTreeMap<Metric, Histogram>,
    /// Keyed by `cash`, `grade`, `intimacy`, `combat`.
    pub ingame_histograms: BTreeMap<String, Histogram>,
}

/// `roles` maps each `(player, timestamp)` instance to a role label that is
/// comparable across timestamps.
pub fn compute_overview(
    graphs: &[TimestampGraph],
    metric_rows: &[NodeMetricRow],
    roles: &BTreeMap<(PlayerId, usize), u32>,
) -> OverviewStats {
    let timestamps = graphs
        .iter()
        .map(|g| {
            let changed = if g.index == 0 {
                0
            } else {
                g.nodes
                    .iter()
                    .filter(|p| {
                        let now = roles.get(&((*p).clone(), g.index));
                        let before = roles.get(&((*p).clone(), g.index - 1));
                        matches!((now, before), (Some(a), Some(b)) if a != b)
                    })
                    .count()
            };
            let transition_pct = if g.nodes.is_empty() {
                0.0
            } else {
                changed as f64 / g.nodes.len() as f64 * 100.0
            };
            TimestampSummary {
                index: g.index,
                node_count: g.node_count(),
                edge_count: g.edge_count(),
                transition_pct,
            }
        })
        .collect();

    let metric_histograms = Metric::ALL
        .iter()
        .map(|&m| {
            let vals: Vec<f64> = metric_rows.iter().map(|r| r.get(m)).collect();
            (m, Histogram::equal_width(&vals, OVERVIEW_BINS))
        })
        .collect();

    let mut ingame: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for g in graphs {
        for m in g.ingame.values() {
            ingame.entry("cash".into()).or_default().push(m.cash);
            ingame.entry("grade".into()).or_default().push(m.grade);
            ingame.entry("intimacy".into()).or_default().push(m.intimacy_total);
            ingame.entry("combat".into()).or_default().push(m.combat_score);
        }
    }
    let ingame_histograms = ingame
        .into_iter()
        .map(|(k, v)| (k, Histogram::equal_width(&v, OVERVIEW_BINS)))
        .collect();

    OverviewStats {
        timestamps,
        metric_histograms,
        ingame_histograms,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::TimestampGraph;

    fn graphs_with(players: usize) -> Vec<TimestampGraph> {
        (0..2)
            .map(|t| {
                let mut g = TimestampGraph::from_edges(t, []);
                g.index = t;
                for p in 0..players {
                    g.nodes.insert(format!("p{p:02}"));
                }
                g
            })
            .collect()
    }

    fn roles(players: usize, changed: usize) -> BTreeMap<(PlayerId, usize), u32> {
        let mut r = BTreeMap::new();
        for p in 0..players {
            let id = format!("p{p:02}");
            r.insert((id.clone(), 0), 1);
            r.insert((id, 1), if p < changed { 2 } else { 1 });
        }
        r
    }

    #[test]
    fn transition_percentages() {
        let g = graphs_with(12);
        assert_eq!(compute_overview(&g, &[], &roles(12, 0)).timestamps[1].transition_pct, 0.0);
        assert_eq!(compute_overview(&g, &[], &roles(12, 12)).timestamps[1].transition_pct, 100.0);
        assert_eq!(compute_overview(&g, &[], &roles(12, 3)).timestamps[1].transition_pct, 25.0);
        assert_eq!(compute_overview(&g, &[], &roles(12, 3)).timestamps[0].transition_pct, 0.0);
    }

    #[test]
    fn histograms_have_twenty_bins() {
        let rows = crate::metrics::node_metrics_for(&crate::metrics::fixtures::star(5), 0, 1);
        let o = compute_overview(&graphs_with(1), &rows, &BTreeMap::new());
        assert_eq!(o.metric_histograms.len(), 6);
        assert!(o.metric_histograms.values().all(|h| h.counts.len() == 20));
        assert_eq!(o.metric_histograms[&Metric::Degree].counts.iter().sum::<u64>(), 6);
    }
}
