//! Forward/inverse transform throughput on one thread versus the full pool.
//! Run with `--no-default-features` to measure the sequential build.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use sphemu_core::grid::synth_bandlimited;
use sphemu_core::par::with_threads;
use sphemu_core::{FieldSeries, GridSpec, ShtPlan};

fn thread_counts() -> Vec<usize> {
    let all = std::thread::available_parallelism().map_or(1, |c| c.get());
    if all > 1 {
        vec![1, all]
    } else {
        vec![1]
    }
}

fn series(spec: GridSpec, n_times: usize) -> FieldSeries {
    let fields = (0..n_times)
        .map(|t| synth_bandlimited(spec, t as u64).unwrap().with_indices(t + 1, 1))
        .collect();
    FieldSeries::new(spec, n_times, 1, fields).unwrap()
}

fn single_field(c: &mut Criterion) {
    let mut group = c.benchmark_group("sht_single");
    for l in [32, 64, 128] {
        let spec = GridSpec::from_band_limit(l).unwrap();
        let plan = ShtPlan::new(spec).unwrap();
        let field = synth_bandlimited(spec, 1).unwrap();
        let coeffs = plan.forward(&field).unwrap();
        group.bench_with_input(BenchmarkId::new("forward", l), &l, |b, _| b.iter(|| plan.forward(&field).unwrap()));
        group.bench_with_input(BenchmarkId::new("inverse", l), &l, |b, _| b.iter(|| plan.inverse(&coeffs).unwrap()));
    }
    group.finish();
}

fn batch(c: &mut Criterion) {
    let mut group = c.benchmark_group("sht_forward_batch");
    group.sample_size(20);
    let spec = GridSpec::from_band_limit(32).unwrap();
    let plan = ShtPlan::new(spec).unwrap();
    let data = series(spec, 64);
    group.throughput(Throughput::Elements(64));
    for threads in thread_counts() {
        group.bench_with_input(BenchmarkId::new("L32_T64_threads", threads), &threads, |b, &t| {
            with_threads(t, || b.iter(|| plan.forward_batch(&data).unwrap()))
        });
    }
    group.finish();
}

fn plan_build(c: &mut Criterion) {
    let mut group = c.benchmark_group("sht_plan");
    group.sample_size(10);
    for l in [64, 128] {
        let spec = GridSpec::from_band_limit(l).unwrap();
        group.bench_with_input(BenchmarkId::new("build", l), &spec, |b, s| b.iter(|| ShtPlan::new(*s).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, single_field, batch, plan_build);
criterion_main!(benches);
