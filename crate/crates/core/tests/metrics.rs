mod common;

use common::oracles::{self, Graph};
use proptest::prelude::*;
use roleseer_core::metrics::{
    betweenness_scores, closeness_scores, label_propagation, leverage_scores, pagerank_scores, within_module_degree_for, PageRankConfig, Topology,
};

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

#[test]
fn metrics_match_brute_force() {
    for seed in 0..200 {
        let g = Graph::random(seed, 12);
        let topo = Topology::from_edges(g.n, &g.edges);
        assert!(close(&betweenness_scores(&topo), &oracles::betweenness(&g), 1e-6), "betweenness, graph {seed}");
        assert!(close(&closeness_scores(&topo), &oracles::closeness(&g), 1e-6), "closeness, graph {seed}");
        assert!(close(&pagerank_scores(&topo, &PageRankConfig::default()).scores, &oracles::pagerank(&g, 0.85), 1e-6), "pagerank, graph {seed}");
        assert!(close(&leverage_scores(&topo), &oracles::leverage(&g), 1e-6), "leverage, graph {seed}");
        let communities = label_propagation(&topo, seed);
        assert!(close(&within_module_degree_for(&topo, &communities), &oracles::within_module_degree(&g, &communities), 1e-6), "wmd, graph {seed}");
    }
}

#[test]
fn star_and_path_by_hand() {
    // star: centre lies on every leaf pair's only path
    let topo = Topology::from_edges(5, &[(0, 1), (0, 2), (0, 3), (0, 4)]);
    assert_eq!(betweenness_scores(&topo)[0], 6.0);
    assert_eq!(closeness_scores(&topo)[0], 1.0);
    assert_eq!(leverage_scores(&topo)[0], 0.6);
    let topo = Topology::from_edges(3, &[(0, 1), (1, 2)]);
    assert_eq!(betweenness_scores(&topo), vec![0.0, 1.0, 0.0]);
}

fn graphs() -> impl Strategy<Value = Graph> {
    (1usize..16).prop_flat_map(|n| {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
        let m = pairs.len();
        proptest::collection::vec(any::<bool>(), m).prop_map(move |keep| Graph {
            n,
            edges: pairs.iter().zip(keep).filter(|(_, k)| *k).map(|(p, _)| *p).collect(),
        })
    })
}

proptest! {
    #[test]
    fn pagerank_is_a_distribution(g in graphs()) {
        let topo = Topology::from_edges(g.n, &g.edges);
        let pr = pagerank_scores(&topo, &PageRankConfig::default());
        prop_assert!((pr.scores.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        prop_assert!(pr.scores.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn bounded_metrics(g in graphs()) {
        let topo = Topology::from_edges(g.n, &g.edges);
        prop_assert!(leverage_scores(&topo).iter().all(|&x| (-1.0..=1.0).contains(&x)));
        prop_assert!(closeness_scores(&topo).iter().all(|&x| (0.0..=1.0 + 1e-12).contains(&x)));
        prop_assert!(betweenness_scores(&topo).iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn regular_neighbourhood_has_zero_leverage(n in 3usize..12) {
        // a cycle is 2-regular
        let edges: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        let topo = Topology::from_edges(n, &edges);
        prop_assert!(leverage_scores(&topo).iter().all(|&x| x == 0.0));
    }
}
