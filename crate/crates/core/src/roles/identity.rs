//! Role identities across snapshots: a cluster inherits the color of its
//! most similar predecessor when their metric distributions are close.

use crate::error::Result;
use crate::metrics::Metric;

use super::divergence::js_divergence;
use super::{RoleCluster, SnapshotRoles};

/// Mean JS divergence over the six metric histograms.
pub fn role_distance(a: &RoleCluster, b: &RoleCluster) -> Result<f64> {
    let mut total = 0.0;
    for m in Metric::ALL {
        total += js_divergence(&a.metric_histograms[&m], &b.metric_histograms[&m])?;
    }
    Ok(total / Metric::ALL.len() as f64)
}

/// Assigns `color_id` to every cluster. Snapshot 0 mints one color per
/// cluster; later clusters are matched greedily in ascending distance (ties
/// go to the larger cluster) and inherit only within `tau`, each predecessor
/// color at most once.
pub fn match_role_identities(snapshots: &mut [SnapshotRoles], tau: f64) -> Result<()> {
    let mut next_color = 0u32;
    for s in 0..snapshots.len() {
        let (done, rest) = snapshots.split_at_mut(s);
        let current = &mut rest[0];
        let prev = done.last().filter(|p| !p.clusters.is_empty());
        let mut colors: Vec<Option<u32>> = vec![None; current.clusters.len()];
        if let Some(prev) = prev {
            let mut pairs = Vec::new();
            for (i, c) in current.clusters.iter().enumerate() {
                for (j, p) in prev.clusters.iter().enumerate() {
                    pairs.push((role_distance(c, p)?, i, j));
                }
            }
            pairs.sort_by(|a, b| {
                a.0.total_cmp(&b.0)
                    .then_with(|| current.clusters[b.1].size.cmp(&current.clusters[a.1].size))
                    .then_with(|| (a.1, a.2).cmp(&(b.1, b.2)))
            });
            let mut used = vec![false; prev.clusters.len()];
            for (d, i, j) in pairs {
                if d <= tau && colors[i].is_none() && !used[j] {
                    colors[i] = Some(prev.clusters[j].color_id);
                    used[j] = true;
                }
            }
        }
        for (c, color) in current.clusters.iter_mut().zip(colors) {
            c.color_id = color.unwrap_or_else(|| {
                next_color += 1;
                next_color - 1
            });
        }
        if let Some(max) = current.clusters.iter().map(|c| c.color_id).max() {
            next_color = next_color.max(max + 1);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::{summarize_cluster, Instance, InstanceTable};
    use super::*;
    use crate::metrics::NodeMetricRow;

    fn table() -> InstanceTable {
        let rows: Vec<NodeMetricRow> = (0..40)
            .map(|i| NodeMetricRow {
                player: format!("p{i:02}"),
                timestamp: i / 10,
                degree: (i % 10) as f64,
                pagerank: (i % 10) as f64 / 10.0,
                betweenness: (i % 5) as f64,
                leverage_centrality: 0.0,
                within_module_degree: (i % 3) as f64,
                closeness: 0.5,
            })
            .collect();
        InstanceTable::new(&rows, &[])
    }

    fn snapshot(index: usize, groups: &[&[usize]], t: &InstanceTable) -> SnapshotRoles {
        let clusters = groups
            .iter()
            .enumerate()
            .map(|(c, g)| {
                let members = g.iter().map(|&i| Instance::new(format!("p{i:02}"), i / 10)).collect();
                summarize_cluster(index, c as u32, members, t).unwrap()
            })
            .collect();
        SnapshotRoles {
            snapshot: index,
            timestamps: vec![],
            points: vec![],
            clusters,
            degenerate: false,
        }
    }

    #[test]
    fn identical_populations_inherit() {
        let t = table();
        let low: &[usize] = &[0, 1, 2, 3, 4];
        let high: &[usize] = &[5, 6, 7, 8, 9];
        let mut s = vec![snapshot(0, &[low, high], &t), snapshot(1, &[high, low], &t)];
        match_role_identities(&mut s, 0.3).unwrap();
        assert_eq!(s[1].clusters[0].color_id, s[0].clusters[1].color_id);
        assert_eq!(s[1].clusters[1].color_id, s[0].clusters[0].color_id);
    }

    #[test]
    fn zero_tau_mints_new_colors() {
        let t = table();
        let mut s = vec![snapshot(0, &[&[0, 1, 2, 3, 4]], &t), snapshot(1, &[&[0, 1, 2, 3]], &t)];
        match_role_identities(&mut s, 0.0).unwrap();
        assert_ne!(s[1].clusters[0].color_id, s[0].clusters[0].color_id);
    }

    #[test]
    fn inheritance_injective() {
        let t = table();
        let a: &[usize] = &[0, 1, 2, 3, 4];
        let mut s = vec![snapshot(0, &[a], &t), snapshot(1, &[a, a], &t)];
        match_role_identities(&mut s, 1.0).unwrap();
        assert_ne!(s[1].clusters[0].color_id, s[1].clusters[1].color_id);
    }
}
