use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roleseer_core::alignment::{align_chain, align_pair, AlignConfig};
use roleseer_core::embedding::EmbeddingSpace;

fn random_space(t: usize, n: usize, d: usize, seed: u64) -> EmbeddingSpace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids = (0..n).map(|i| format!("p{i:03}")).collect();
    let data = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
    EmbeddingSpace::new(t, d, ids, data).unwrap()
}

fn shifted(s: &EmbeddingSpace, t: usize, offset: &[f64]) -> EmbeddingSpace {
    let data = (0..s.len()).flat_map(|i| s.row(i).iter().zip(offset).map(|(x, o)| x + o).collect::<Vec<_>>()).collect();
    EmbeddingSpace::new(t, s.dims, s.ids.clone(), data).unwrap()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn constant_offset_recovered(seed in 0u64..10_000, n in 5usize..40, d in 2usize..24, scale in 0.1f64..20.0) {
        let a = random_space(0, n, d, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xff);
        let offset: Vec<f64> = (0..d).map(|_| rng.random_range(-scale..scale)).collect();
        let b = shifted(&a, 1, &offset);
        let (rel, aligned) = align_pair(&a, &b, &AlignConfig { seed, ..AlignConfig::default() }).unwrap();
        prop_assert!(rel.residual_after <= rel.residual_before);
        for (r, o) in rel.r.iter().zip(&offset) {
            prop_assert!((r - o).abs() < 1e-3, "r {r} vs offset {o}");
        }
        for i in 0..a.len() {
            prop_assert!(dist(a.row(i), aligned.row(i)) < 1e-3);
        }
    }

    #[test]
    fn residual_never_grows(seed in 0u64..10_000, n in 2usize..30, d in 2usize..16, overlap in 1usize..30) {
        let a = random_space(0, n, d, seed);
        let mut b = random_space(1, n, d, seed + 1);
        // relabel part of the second space so only some players anchor
        let keep = overlap.min(n);
        for (i, id) in b.ids.iter_mut().enumerate().skip(keep) {
            *id = format!("q{i:03}");
        }
        let (rel, aligned) = align_pair(&a, &b, &AlignConfig { seed, ..AlignConfig::default() }).unwrap();
        prop_assert!(rel.residual_after <= rel.residual_before + 1e-12);
        prop_assert_eq!(rel.anchor_count, keep);
        // translation is an isometry inside the space
        for i in 0..b.len() {
            for j in i + 1..b.len() {
                prop_assert!((dist(b.row(i), b.row(j)) - dist(aligned.row(i), aligned.row(j))).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn chain_of_offsets_lands_in_first_frame() {
    let base = random_space(0, 30, 8, 7);
    let offsets: [[f64; 8]; 3] = [[1.0, -2.0, 0.5, 3.0, 0.0, 0.1, -0.7, 2.0], [-4.0, 0.0, 0.0, 1.0, 1.5, -1.0, 0.2, 0.0], [0.3; 8]];
    let mut spaces = vec![base.clone()];
    let mut acc = vec![0.0; 8];
    for (k, o) in offsets.iter().enumerate() {
        for (a, x) in acc.iter_mut().zip(o) {
            *a += x;
        }
        spaces.push(shifted(&base, k + 1, &acc));
    }
    let chain = align_chain(&spaces, &AlignConfig::default()).unwrap();
    assert_eq!(chain.segments, vec![vec![0, 1, 2, 3]]);
    for (rel, o) in chain.relations.iter().zip(&offsets) {
        for (r, x) in rel.r.iter().zip(o) {
            assert!((r - x).abs() < 1e-3);
        }
    }
    for s in &chain.spaces {
        for i in 0..base.len() {
            assert!(dist(base.row(i), s.row(i)) < 1e-3);
        }
    }
}

#[test]
fn gap_without_anchors_splits_segments() {
    let a = random_space(0, 5, 3, 1);
    let mut b = random_space(1, 5, 3, 2);
    b.ids = (0..5).map(|i| format!("other{i}")).collect();
    let c = shifted(&b, 2, &[1.0, 1.0, 1.0]);
    let chain = align_chain(&[a, b, c], &AlignConfig::default()).unwrap();
    assert_eq!(chain.segments, vec![vec![0], vec![1, 2]]);
    assert_eq!(chain.relations[0].anchor_count, 0);
}
