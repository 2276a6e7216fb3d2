use criterion::{criterion_group, criterion_main, Criterion};
use roleseer_bench::blobs;
use roleseer_core::roles::divergence::js_divergence;
use roleseer_core::roles::tsne::{project, TsneConfig};
use roleseer_core::roles::xmeans::{xmeans, XMeansConfig};
use std::hint::black_box;

fn bench(c: &mut Criterion) {
    let p: Vec<f64> = (1..=20).map(|i| i as f64 / 210.0).collect();
    let q: Vec<f64> = (1..=20).rev().map(|i| i as f64 / 210.0).collect();
    c.bench_function("js 20 bins", |b| b.iter(|| js_divergence(black_box(&p), black_box(&q)).unwrap()));

    let data = blobs(100, 3, 16, 2);
    let mut g = c.benchmark_group("projection");
    g.sample_size(10);
    g.bench_function("tsne exact n=300", |b| b.iter(|| project(black_box(&data), 16, &TsneConfig::default()).unwrap()));
    g.finish();

    let pts2 = blobs(300, 4, 2, 3);
    let rows: Vec<&[f64]> = pts2.chunks(2).collect();
    c.bench_function("xmeans n=1200", |b| b.iter(|| xmeans(black_box(&rows), &XMeansConfig::default()).unwrap()));
}

criterion_group!(benches, bench);
criterion_main!(benches);
