use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use robust_snell::hedging::{saturate, superhedge};
use robust_snell::linalg::pseudo_inverse;
use robust_snell::snell::{brute_force_value, robust_snell};
use robust_snell_bench::{psd_matrix, random_instance, uv_instance};

fn envelope(c: &mut Criterion) {
    let mut group = c.benchmark_group("robust_snell");
    for steps in [6, 8, 10] {
        let inst = uv_instance(steps);
        group.bench_with_input(BenchmarkId::new("uv_lattice", steps), &inst, |b, inst| {
            b.iter(|| robust_snell(&inst.tree, &inst.family, black_box(&inst.xi)).unwrap())
        });
    }
    group.finish();
}

fn hedging(c: &mut Criterion) {
    let mut group = c.benchmark_group("superhedge");
    for (dim, horizon) in [(1, 4), (2, 4), (2, 6)] {
        let inst = random_instance(11, horizon, 3, dim, 1);
        let id = format!("d{dim}_T{horizon}");
        group.bench_function(BenchmarkId::new("price_and_strategy", &id), |b| {
            b.iter(|| superhedge(&inst.tree, black_box(&inst.xi)).unwrap())
        });
        group.bench_function(BenchmarkId::new("saturate", &id), |b| {
            b.iter(|| saturate(black_box(&inst.tree)).unwrap())
        });
    }
    group.finish();
}

fn brute_force(c: &mut Criterion) {
    let mut group = c.benchmark_group("brute_force");
    group.sample_size(20);
    for (horizon, successors) in [(2, 3), (3, 2), (3, 3)] {
        let inst = random_instance(5, horizon, successors, 1, 2);
        let id = format!("T{horizon}_b{successors}");
        group.bench_function(BenchmarkId::from_parameter(id), |b| {
            b.iter(|| {
                brute_force_value(&inst.tree, &inst.family, black_box(&inst.xi), u128::MAX).unwrap()
            })
        });
    }
    group.finish();
}

fn pinv(c: &mut Criterion) {
    let mut group = c.benchmark_group("pseudo_inverse");
    for d in [2, 5, 10] {
        let m = psd_matrix(d, 0.0);
        group.bench_with_input(BenchmarkId::from_parameter(d), &m, |b, m| {
            b.iter(|| pseudo_inverse(black_box(m)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, envelope, hedging, brute_force, pinv);
criterion_main!(benches);
