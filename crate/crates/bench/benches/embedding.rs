use criterion::{criterion_group, criterion_main, Criterion};
use roleseer_bench::random_topology;
use roleseer_core::embedding::structural::{all_structural_distances, dtw, PairSelection};
use roleseer_core::embedding::{build_corpus, embed_topology, EmbedConfig};
use std::hint::black_box;

fn bench(c: &mut Criterion) {
    let a: Vec<u32> = (0..64).map(|i| (i * 7 % 13) as u32).collect();
    let b: Vec<u32> = (0..48).map(|i| (i * 5 % 11) as u32).collect();
    c.bench_function("dtw 64x48", |bn| bn.iter(|| dtw(black_box(&a), black_box(&b))));

    let topo = random_topology(100, 0.05, 1);
    c.bench_function("structural distances n=100", |bn| {
        bn.iter(|| all_structural_distances(black_box(&topo), &PairSelection::default()))
    });

    let cfg = EmbedConfig::default().seeded(1, 0);
    c.bench_function("walk corpus n=100", |bn| bn.iter(|| build_corpus(black_box(&topo), &cfg)));

    let mut g = c.benchmark_group("embed");
    g.sample_size(10);
    g.bench_function("struc2vec n=100", |bn| bn.iter(|| embed_topology(black_box(&topo), 0, &cfg).unwrap()));
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
