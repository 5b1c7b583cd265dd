use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion};
use deptopo_bench::{codes, population};
use deptopo_core::measures::{h_deg, h_ks, max_h_deg};
use deptopo_core::optimizer::{self, OptimizerConfig};
use deptopo_core::{build_extrema_table, CostPair};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

fn decode(c: &mut Criterion) {
    let mut group = c.benchmark_group("decode");
    for n in [10, 50] {
        let input = codes(n, 256, 1);
        group.bench_with_input(BenchmarkId::from_parameter(n), &input, |b, input| {
            b.iter(|| input.iter().map(|code| code.decode().root()).sum::<usize>())
        });
    }
    group.finish();
}

fn measures(c: &mut Criterion) {
    let mut group = c.benchmark_group("measures");
    for n in [10, 50] {
        let trees: Vec<_> = codes(n, 256, 2).iter().map(|code| code.decode()).collect();
        group.bench_with_input(BenchmarkId::new("h_ks", n), &trees, |b, trees| {
            b.iter(|| trees.iter().map(|t| h_ks(t).unwrap()).sum::<f64>())
        });
        group.bench_with_input(BenchmarkId::new("h_deg", n), &trees, |b, trees| {
            b.iter(|| trees.iter().map(h_deg).sum::<f64>())
        });
    }
    group.finish();
}

fn extrema(c: &mut Criterion) {
    c.bench_function("max_h_deg/50", |b| b.iter(|| max_h_deg(black_box(50))));
}

fn optimizer_epochs(c: &mut Criterion) {
    let table = build_extrema_table(50).unwrap();
    let config = OptimizerConfig { epochs: 10, record_every: 10, ..OptimizerConfig::default() };
    c.bench_function("optimizer/100x20/10 epochs", |b| {
        b.iter_batched(
            || (population(20, 100, 3), ChaCha8Rng::seed_from_u64(4)),
            |(p, mut rng)| optimizer::run(p, &config, &table, &mut rng).unwrap().0.members[0].cost,
            BatchSize::SmallInput,
        )
    });
    let sample = codes(20, 1, 5)[0].decode();
    c.bench_function("cost_pair/20", |b| b.iter(|| CostPair::of(black_box(&sample)).unwrap()));
}

criterion_group!(benches, decode, measures, extrema, optimizer_epochs);
criterion_main!(benches);
