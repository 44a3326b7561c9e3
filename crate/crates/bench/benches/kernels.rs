use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use rcar_bench::{reference_params, reference_path};
use rcar_core::estimate::correlation_test;
use rcar_core::numerics::spectral_radius;
use rcar_core::{Analysis, TestOptions};

fn tables(c: &mut Criterion) {
    let p = reference_params().moments().unwrap();
    let analysis = Analysis::new(&p).unwrap();
    c.bench_function("spectral_radius/M", |b| {
        b.iter(|| spectral_radius(black_box(&analysis.second.m)))
    });
    c.bench_function("spectral_radius/H", |b| {
        b.iter(|| spectral_radius(black_box(&analysis.fourth.h)))
    });
    c.bench_function("analysis/full_stack", |b| {
        b.iter(|| Analysis::new(black_box(&p)))
    });
}

fn paths(c: &mut Criterion) {
    let params = reference_params();
    let mut group = c.benchmark_group("simulate");
    for n in [1_000usize, 100_000] {
        group.throughput(Throughput::Elements(n as u64));
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter(|| rcar_core::simulate::simulate(&params, n, 7, 2000))
        });
    }
    group.finish();

    let traj = reference_path(5000);
    let opts = TestOptions::default();
    c.bench_function("correlation_test/5000", |b| {
        b.iter(|| correlation_test(black_box(&traj), &opts))
    });
}

criterion_group!(benches, tables, paths);
criterion_main!(benches);
