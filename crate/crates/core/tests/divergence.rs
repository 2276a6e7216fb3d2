mod common;

use common::oracles;
use proptest::prelude::*;
use roleseer_core::roles::divergence::{score_metric, KL_EPSILON};
use roleseer_core::roles::{evaluate_clustering, js_divergence};

#[test]
fn scores_match_formulas() {
    for seed in 0..500 {
        let (values, labels, bins) = oracles::random_clustering(seed);
        let got = score_metric(&values, &labels, bins);
        let (inter, intra) = oracles::direct_scores(&values, &labels, bins, KL_EPSILON);
        assert!((got.inter_cluster - inter).abs() <= 1e-12, "seed {seed}: {} vs {inter}", got.inter_cluster);
        assert!((got.intra_cluster - intra).abs() <= 1e-12, "seed {seed}: {} vs {intra}", got.intra_cluster);
    }
}

#[test]
fn constant_metric_scores_zero() {
    let s = score_metric(&[3.0; 6], &[0, 0, 1, 1, 2, 2], 20);
    assert!(s.degenerate);
    assert_eq!(s.inter_cluster, 0.0);
    assert_eq!(s.intra_cluster, 0.0);
}

#[test]
fn report_needs_two_clusters() {
    assert!(evaluate_clustering("m", &[[0.0; 6], [1.0; 6]], &[0, 0]).is_err());
    assert!(evaluate_clustering("m", &[[0.0; 6]], &[0, 1]).is_err());
    let r = evaluate_clustering("m", &[[0.0; 6], [1.0; 6]], &[0, 1]).unwrap();
    assert_eq!(r.cluster_count, 2);
}

#[test]
fn js_hand_case() {
    let v = js_divergence(&[1.0, 0.0], &[0.5, 0.5]).unwrap();
    assert!((v - oracles::js(&[1.0, 0.0], &[0.5, 0.5])).abs() < 1e-9);
    assert_eq!(format!("{v:.4}"), "0.2158");
    assert!((v * 1e4).trunc() == 2157.0);
}

#[test]
fn js_rejects_bad_input() {
    assert!(js_divergence(&[1.0], &[0.5, 0.5]).is_err());
    assert!(js_divergence(&[0.7, 0.7], &[0.5, 0.5]).is_err());
    assert!(js_divergence(&[1.5, -0.5], &[0.5, 0.5]).is_err());
}

fn distribution(len: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(0.0f64..1.0, len).prop_filter_map("all zero", |v| {
        let s: f64 = v.iter().sum();
        (s > 1e-6).then(|| v.iter().map(|x| x / s).collect())
    })
}

fn pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..25).prop_flat_map(|n| (distribution(n), distribution(n)))
}

proptest! {
    #[test]
    fn js_symmetric_and_bounded((p, q) in pair()) {
        let a = js_divergence(&p, &q).unwrap();
        let b = js_divergence(&q, &p).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!(a >= 0.0);
        prop_assert!(a <= std::f64::consts::LN_2 + 1e-12);
        prop_assert!((a - oracles::js(&p, &q)).abs() < 1e-9);
    }

    #[test]
    fn js_self_is_zero(p in (1usize..25).prop_flat_map(distribution)) {
        prop_assert!(js_divergence(&p, &p).unwrap().abs() < 1e-12);
    }

    #[test]
    fn disjoint_supports_reach_ln2(n in 1usize..10) {
        let mut p = vec![0.0; 2 * n];
        let mut q = vec![0.0; 2 * n];
        p[..n].iter_mut().for_each(|x| *x = 1.0 / n as f64);
        q[n..].iter_mut().for_each(|x| *x = 1.0 / n as f64);
        prop_assert!((js_divergence(&p, &q).unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
    }
}
