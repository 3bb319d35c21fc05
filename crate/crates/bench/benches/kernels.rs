use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use vrd_core::montecarlo::{figures, oracle, run_trials};
use vrd_core::profiler::{measure_row_rdt, profile_device, HammerGrid};
use vrd_core::svard::{
    assign_thresholds, generate_trace, simulate_chronus, simulate_para, ThresholdPolicy, TraceKind,
    DEFAULT_EXTRA_DEMOTION_FRACTION, DEFAULT_PARA_EPSILON,
};
use vrd_core::{profiler, DeviceSpec};

fn device_kernels(c: &mut Criterion) {
    let spec = DeviceSpec::worst_case();
    let mut d = spec.build(1).unwrap();
    let e = d.begin_episode();
    let row = d.tested_rows()[0];
    c.bench_function("hammer one row", |b| {
        b.iter(|| d.hammer(black_box(row), 10_000, e).unwrap())
    });

    let grid = HammerGrid::fine(4000).unwrap();
    c.bench_function("measure row on fine grid", |b| {
        b.iter(|| measure_row_rdt(&d, black_box(row), &grid, e).unwrap())
    });

    c.bench_function("profile worst device, 10 episodes", |b| {
        b.iter_batched(
            || spec.build(1).unwrap(),
            |mut d| profile_device(&mut d, 10).unwrap(),
            BatchSize::LargeInput,
        )
    });
}

fn ensemble_kernels(c: &mut Criterion) {
    let mut g = c.benchmark_group("error model");
    g.sample_size(10);
    let worst = figures::worst_case();
    g.bench_function("100 trials, dL=12 N=5", |b| {
        b.iter(|| run_trials(&worst, 100, 2_000_000, black_box(7)).unwrap())
    });
    let removal = worst.clone().with_removal(true);
    g.bench_function("100 trials, dL=12 N=5, removal", |b| {
        b.iter(|| run_trials(&removal, 100, 2_000_000, black_box(7)).unwrap())
    });
    g.bench_function("integrated oracle, dL=12 N=5", |b| {
        b.iter(|| oracle::integrated_mttue(black_box(&worst), 200_000).unwrap())
    });
    g.finish();
}

fn mitigation_kernels(c: &mut Criterion) {
    let mut d = DeviceSpec::worst_case().build(1).unwrap();
    let s = profiler::summarize(&profile_device(&mut d, 5).unwrap()).unwrap();
    let map = assign_thresholds(&s, ThresholdPolicy::SvardTwoBin, DEFAULT_EXTRA_DEMOTION_FRACTION).unwrap();
    let trace = generate_trace(TraceKind::Zipf { exponent: 1.0 }, d.tested_rows(), 100_000, 3).unwrap();
    c.bench_function("PARA, 100k activations", |b| {
        b.iter(|| simulate_para(black_box(&trace), &map, DEFAULT_PARA_EPSILON, 5).unwrap())
    });
    c.bench_function("Chronus, 100k activations", |b| {
        b.iter(|| simulate_chronus(black_box(&trace), &map).unwrap())
    });
}

criterion_group!(benches, device_kernels, ensemble_kernels, mitigation_kernels);
criterion_main!(benches);
