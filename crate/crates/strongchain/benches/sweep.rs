//! Compares the rayon-parallel seed sweep against the sequential
//! fallback on the same scenario batch.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use strongchain::harness::scenario::bundled_by_name;
use strongchain::harness::sweep::{seeds, sweep_parallel, sweep_sequential};

fn bench_sweep(c: &mut Criterion) {
    let sc = bundled_by_name("clean-strong-t1").expect("bundled scenario");
    let mut group = c.benchmark_group("seed-sweep");
    group.sample_size(10);
    for count in [4usize, 16] {
        let batch = seeds(sc.seed, count);
        group.bench_with_input(BenchmarkId::new("sequential", count), &batch, |b, batch| {
            b.iter(|| sweep_sequential(&sc, batch).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("parallel", count), &batch, |b, batch| {
            b.iter(|| sweep_parallel(&sc, batch).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_sweep);
criterion_main!(benches);
