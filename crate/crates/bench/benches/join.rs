use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use pbsm_core::sweep::{forward_scan_join, sort_by_lower, DupFilter};
use pbsm_core::{
    generate_synthetic, join, Axis, AxisPolicy, JoinConfig, PartitionLayout, ResultSink,
    SyntheticSpec,
};

fn inputs(n: usize, extent: f64) -> (Vec<pbsm_core::Rect>, Vec<pbsm_core::Rect>) {
    let r = generate_synthetic(&SyntheticSpec::uniform(n, extent, 1));
    let s = generate_synthetic(&SyntheticSpec::uniform(n, extent, 2).with_first_id(n as u64));
    (r, s)
}

fn plane_sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("plane_sweep");
    for n in [1_000usize, 10_000] {
        let (mut r, mut s) = inputs(n, 0.01);
        sort_by_lower(&mut r, Axis::X);
        sort_by_lower(&mut s, Axis::X);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| {
                let mut sink = ResultSink::counting();
                forward_scan_join(
                    black_box(&r),
                    black_box(&s),
                    Axis::X,
                    DupFilter::None,
                    &mut sink,
                );
                sink.count()
            })
        });
    }
    group.finish();
}

fn partition_count(c: &mut Criterion) {
    let (r, s) = inputs(100_000, 0.001);
    let mut group = c.benchmark_group("stripes_k");
    group.sample_size(10);
    for k in [1usize, 10, 100, 1_000, 10_000] {
        let cfg = JoinConfig::new(PartitionLayout::stripes(Axis::X, k).unwrap());
        group.bench_with_input(BenchmarkId::from_parameter(k), &cfg, |b, cfg| {
            b.iter(|| {
                join(black_box(&r), black_box(&s), cfg)
                    .unwrap()
                    .result_count
            })
        });
    }
    group.finish();
}

fn grid_axis_policy(c: &mut Criterion) {
    let (r, s) = inputs(100_000, 0.001);
    let mut group = c.benchmark_group("grid_100_axis");
    group.sample_size(10);
    for (name, policy) in [
        ("x", AxisPolicy::ForcedX),
        ("y", AxisPolicy::ForcedY),
        ("adaptive", AxisPolicy::Adaptive),
    ] {
        let cfg = JoinConfig::new(PartitionLayout::grid(100).unwrap()).with_axis_policy(policy);
        group.bench_with_input(BenchmarkId::from_parameter(name), &cfg, |b, cfg| {
            b.iter(|| {
                join(black_box(&r), black_box(&s), cfg)
                    .unwrap()
                    .result_count
            })
        });
    }
    group.finish();
}

criterion_group!(benches, plane_sweep, partition_count, grid_axis_policy);
criterion_main!(benches);
