//! Small descriptive-statistics helpers shared by the metric and role views.

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population variance; 0 for fewer than two values.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
}

/// Linear-interpolated quantile of an ascending slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
        }
    }
}

/// Shannon entropy (natural log) of a count vector.
pub fn entropy(counts: &[f64]) -> f64 {
    let total: f64 = counts.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    counts
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| {
            let p = c / total;
            -p * p.ln()
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct BoxStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl BoxStats {
    pub fn of(values: &[f64]) -> Option<BoxStats> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(BoxStats {
            min: v[0],
            q1: quantile_sorted(&v, 0.25),
            median: quantile_sorted(&v, 0.5),
            q3: quantile_sorted(&v, 0.75),
            max: v[v.len() - 1],
        })
    }
}

/// Equal-width histogram over the observed range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Histogram {
    pub min: f64,
    pub max: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn equal_width(values: &[f64], bins: usize) -> Histogram {
        let bins = bins.max(1);
        let mut counts = vec![0u64; bins];
        if values.is_empty() {
            return Histogram { min: 0.0, max: 0.0, counts };
        }
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for &v in values {
            counts[bin_of(v, min, max, bins)] += 1;
        }
        Histogram { min, max, counts }
    }
}

/// Bin index of `v` in `bins` equal-width bins over `[min, max]`; the top
/// edge belongs to the last bin and a zero-width range maps to bin 0.
pub fn bin_of(v: f64, min: f64, max: f64, bins: usize) -> usize {
    if !(max > min) {
        return 0;
    }
    let pos = ((v - min) / (max - min) * bins as f64).floor();
    (pos.max(0.0) as usize).min(bins - 1)
}

fn choose2(n: u64) -> f64 {
    (n as f64) * (n as f64 - 1.0) / 2.0
}

/// Adjusted Rand index between two labelings of the same items. Two trivial
/// partitions that agree score 1.
pub fn adjusted_rand_index<A: Ord, B: Ord>(a: &[A], b: &[B]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings differ in length");
    let mut table: std::collections::BTreeMap<(&A, &B), u64> = Default::default();
    let mut rows: std::collections::BTreeMap<&A, u64> = Default::default();
    let mut cols: std::collections::BTreeMap<&B, u64> = Default::default();
    for (x, y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&n| choose2(n)).sum();
    let sum_a: f64 = rows.values().map(|&n| choose2(n)).sum();
    let sum_b: f64 = cols.values().map(|&n| choose2(n)).sum();
    let total = choose2(a.len() as u64);
    if total == 0.0 {
        return 1.0;
    }
    let expected = sum_a * sum_b / total;
    let max = (sum_a + sum_b) / 2.0;
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

/// Mean silhouette of 2-D points under `labels`; singleton clusters score 0.
pub fn silhouette(points: &[[f64; 2]], labels: &[u32]) -> f64 {
    let n = points.len();
    if n < 2 {
        return 0.0;
    }
    let dist = |i: usize, j: usize| ((points[i][0] - points[j][0]).powi(2) + (points[i][1] - points[j][1]).powi(2)).sqrt();
    let mut total = 0.0;
    for i in 0..n {
        let mut sums: std::collections::BTreeMap<u32, (f64, usize)> = Default::default();
        for j in 0..n {
            if j != i {
                let e = sums.entry(labels[j]).or_default();
                e.0 += dist(i, j);
                e.1 += 1;
            }
        }
        let own = match sums.get(&labels[i]) {
            Some(&(s, c)) if c > 0 => s / c as f64,
            _ => continue,
        };
        let other = sums
            .iter()
            .filter(|(l, _)| **l != labels[i])
            .map(|(_, &(s, c))| s / c as f64)
            .fold(f64::INFINITY, f64::min);
        if other.is_finite() {
            total += (other - own) / own.max(other);
        }
    }
    total / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entropy_cases() {
        assert_eq!(entropy(&[5.0]), 0.0);
        assert!((entropy(&[1.0, 1.0, 1.0]) - 3f64.ln()).abs() < 1e-12);
        let expected = 3f64.ln() - (2.0 / 3.0) * 2f64.ln();
        assert!((entropy(&[2.0, 1.0]) - expected).abs() < 1e-12);
        assert!((expected - 0.6365).abs() < 1e-4);
    }

    #[test]
    fn quantiles() {
        let b = BoxStats::of(&[4.0, 1.0, 3.0, 2.0, 5.0]).unwrap();
        assert_eq!((b.min, b.q1, b.median, b.q3, b.max), (1.0, 2.0, 3.0, 4.0, 5.0));
        assert!(BoxStats::of(&[]).is_none());
    }

    #[test]
    fn histogram_edges() {
        let h = Histogram::equal_width(&[0.0, 0.5, 1.0], 2);
        assert_eq!(h.counts, vec![1, 2]);
        let h = Histogram::equal_width(&[3.0, 3.0], 4);
        assert_eq!(h.counts, vec![2, 0, 0, 0]);
    }

    #[test]
    fn variance_population() {
        assert_eq!(variance(&[1.0]), 0.0);
        assert!((variance(&[1.0, 3.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ari_cases() {
        assert_eq!(adjusted_rand_index(&[0, 0, 1, 1], &[5, 5, 7, 7]), 1.0);
        // classic example: 0.2424...
        let a = [0, 0, 0, 1, 1, 1];
        let b = [0, 0, 1, 1, 2, 2];
        assert!((adjusted_rand_index(&a, &b) - 0.242_424_242_424).abs() < 1e-9);
    }

    #[test]
    fn silhouette_separated() {
        let pts = [[0.0, 0.0], [0.1, 0.0], [10.0, 0.0], [10.1, 0.0]];
        assert!(silhouette(&pts, &[0, 0, 1, 1]) > 0.95);
    }
}
