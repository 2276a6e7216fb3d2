//! Histogram divergences and clustering quality scores.

use std::collections::BTreeMap;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::Metric;
use crate::stats::{bin_of, variance};

pub const ROLE_BINS: usize = 20;
/// Additive smoothing applied to every bin before the KL terms.
pub const KL_EPSILON: f64 = 1e-9;

/// `KL(p || q)` in nats; bins with `p = 0` contribute nothing.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&a, _)| a > 0.0)
        .map(|(&a, &b)| a * (a / b).ln())
        .sum()
}

/// Jensen–Shannon divergence (natural log), bounded by `ln 2`.
pub fn js_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            got: q.len(),
        });
    }
    for h in [p, q] {
        let s: f64 = h.iter().sum();
        if (s - 1.0).abs() > 1e-9 || h.iter().any(|&x| x < 0.0) {
            return Err(Error::invalid(format!("histogram is not a distribution (sum {s})")));
        }
    }
    let m: Vec<f64> = p.iter().zip(q).map(|(a, b)| (a + b) / 2.0).collect();
    Ok((0.5 * kl_divergence(p, &m) + 0.5 * kl_divergence(q, &m)).max(0.0))
}

/// Normalized counts with `eps` added to every bin, renormalized.
pub fn smoothed(counts: &[f64], eps: f64) -> Vec<f64> {
    let total: f64 = counts.iter().sum();
    let base: Vec<f64> = if total > 0.0 {
        counts.iter().map(|c| c / total).collect()
    } else {
        vec![1.0 / counts.len() as f64; counts.len()]
    };
    let z: f64 = base.iter().map(|b| b + eps).sum();
    base.iter().map(|b| (b + eps) / z).collect()
}

/// Mean `KL(h_p || h_q)` over ordered pairs of distinct clusters.
pub fn inter_cluster_divergence(histograms: &[Vec<f64>]) -> f64 {
    let k = histograms.len();
    if k < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    for p in 0..k {
        for q in 0..k {
            if p != q {
                total += kl_divergence(&histograms[p], &histograms[q]);
            }
        }
    }
    total / (k * (k - 1)) as f64
}

/// Mean over clusters of the within-cluster population variance.
pub fn intra_cluster_variance(clusters: &[Vec<f64>]) -> f64 {
    if clusters.is_empty() {
        return 0.0;
    }
    clusters.iter().map(|c| variance(c)).sum::<f64>() / clusters.len() as f64
}

/// Min-max normalization onto `[0, 1]`; a constant column maps to 0.
pub fn min_max(values: &[f64]) -> (Vec<f64>, bool) {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > min) {
        return (vec![0.0; values.len()], true);
    }
    (values.iter().map(|v| (v - min) / (max - min)).collect(), false)
}

/// Smoothed histogram of already-normalized values over `[0, 1]`.
pub fn unit_histogram(values: &[f64], bins: usize) -> Vec<f64> {
    let mut counts = vec![0.0; bins];
    for &v in values {
        counts[bin_of(v, 0.0, 1.0, bins)] += 1.0;
    }
    smoothed(&counts, KL_EPSILON)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct MetricScore {
    pub inter_cluster: f64,
    pub intra_cluster: f64,
    /// The metric was constant over the population.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct EvaluationReport {
    pub method: String,
    pub cluster_count: usize,
    pub instance_count: usize,
    pub metrics: BTreeMap<Metric, MetricScore>,
}

/// Scores one metric column under a labeling with `bins` histogram bins.
pub fn score_metric(values: &[f64], labels: &[u32], bins: usize) -> MetricScore {
    let (norm, degenerate) = min_max(values);
    let mut groups: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for (v, l) in norm.iter().zip(labels) {
        groups.entry(*l).or_default().push(*v);
    }
    let clusters: Vec<Vec<f64>> = groups.into_values().collect();
    let inter = if degenerate {
        0.0
    } else {
        let hists: Vec<Vec<f64>> = clusters.iter().map(|c| unit_histogram(c, bins)).collect();
        inter_cluster_divergence(&hists)
    };
    MetricScore {
        inter_cluster: inter,
        intra_cluster: intra_cluster_variance(&clusters),
        degenerate,
    }
}

/// Inter- and intra-cluster scores for every metric. `rows[i]` holds the six
/// metric values of the instance labelled `labels[i]`.
pub fn evaluate_clustering(method: &str, rows: &[[f64; 6]], labels: &[u32]) -> Result<EvaluationReport> {
    if rows.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: rows.len(),
            got: labels.len(),
        });
    }
    let k = labels.iter().collect::<std::collections::BTreeSet<_>>().len();
    if k < 2 {
        return Err(Error::invalid("at least two clusters are needed for the inter-cluster score"));
    }
    let metrics = Metric::ALL
        .iter()
        .enumerate()
        .map(|(m, &metric)| {
            let col: Vec<f64> = rows.iter().map(|r| r[m]).collect();
            (metric, score_metric(&col, labels, ROLE_BINS))
        })
        .collect();
    Ok(EvaluationReport {
        method: method.to_owned(),
        cluster_count: k,
        instance_count: rows.len(),
        metrics,
    })
}
