use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use levyflat::hilbert::intersect;
use levyflat::manifold::{closest_point, SamplePoint};
use levyflat::models::{build_hjmm_vasicek, VasicekParams};
use levyflat::spde::simulate_mild;
use levyflat_bench::subspaces;
use std::hint::black_box;

fn bench_intersect(c: &mut Criterion) {
    let mut group = c.benchmark_group("intersect");
    for n in [32, 64, 128] {
        let (_, subs) = subspaces(n, 4, 20, 7);
        group.bench_with_input(BenchmarkId::from_parameter(n), &subs, |b, subs| {
            b.iter(|| intersect(black_box(subs), 1e-6).unwrap())
        });
    }
    group.finish();
}

fn bench_simulate_mild(c: &mut Criterion) {
    let m = build_hjmm_vasicek(&VasicekParams::default()).unwrap();
    let mut group = c.benchmark_group("simulate_mild_hjmm");
    group.sample_size(20);
    for dt in [1e-2, 1e-3] {
        group.bench_with_input(BenchmarkId::from_parameter(dt), &dt, |b, &dt| {
            b.iter(|| simulate_mild(&m.problem, &m.h0, 1.0, dt, black_box(3)).unwrap())
        });
    }
    group.finish();
}

fn bench_closest_point(c: &mut Criterion) {
    let m = build_hjmm_vasicek(&VasicekParams::default()).unwrap();
    let chart = &m.manifold.charts()[0];
    let target = chart.eval(&[0.7, 0.01]);
    let start = SamplePoint::new(0, vec![0.5, 0.0]);
    c.bench_function("closest_point_hjmm", |b| {
        b.iter(|| closest_point(&m.manifold, black_box(&target), &start).unwrap())
    });
}

criterion_group!(benches, bench_intersect, bench_simulate_mild, bench_closest_point);
criterion_main!(benches);
