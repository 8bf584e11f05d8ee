use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use subpress_core::bowen::{dimension_root, BowenSettings};
use subpress_core::fixtures::{
    bernoulli_restricted, diagonal_two_shift, golden_mean, parry_measure, scalar_two_shift_system,
    tilted_two_shift,
};
use subpress_core::pressure::{expected_log_sum, log_partition_sum_by_enumeration};
use subpress_core::{log_partition_sum, Budget, Mode};

fn partition_sums(c: &mut Criterion) {
    let a = tilted_two_shift();
    let d = diagonal_two_shift();
    let budget = Budget::default();
    let base = vec![0; 16];
    let mut group = c.benchmark_group("log_partition_sum");
    for n in [8, 12, 14] {
        group.bench_with_input(BenchmarkId::new("additive-transfer", n), &n, |b, &n| {
            b.iter(|| {
                log_partition_sum(
                    &a.bundle,
                    a.potential.as_ref(),
                    black_box(&base),
                    n,
                    2,
                    &budget,
                )
                .unwrap()
            })
        });
        group.bench_with_input(BenchmarkId::new("additive-enumeration", n), &n, |b, &n| {
            b.iter(|| {
                log_partition_sum_by_enumeration(
                    &a.bundle,
                    a.potential.as_ref(),
                    black_box(&base),
                    n,
                    2,
                    &budget,
                )
                .unwrap()
            })
        });
        group.bench_with_input(BenchmarkId::new("diagonal-cocycle", n), &n, |b, &n| {
            b.iter(|| {
                log_partition_sum(
                    &d.bundle,
                    d.potential.as_ref(),
                    black_box(&base),
                    n,
                    1,
                    &budget,
                )
                .unwrap()
            })
        });
    }
    group.finish();
}

fn expected_pressure(c: &mut Criterion) {
    let f = bernoulli_restricted();
    let budget = Budget::default();
    let mut group = c.benchmark_group("expected_log_sum");
    group.sample_size(10);
    group.bench_function("bernoulli-restricted exact n=12", |b| {
        b.iter(|| {
            expected_log_sum(
                &f.chain,
                &f.bundle,
                f.potential.as_ref(),
                12,
                1,
                Mode::Exact,
                &budget,
            )
            .unwrap()
        })
    });
    group.bench_function("bernoulli-restricted monte-carlo n=200 x 2000", |b| {
        let mode = Mode::MonteCarlo {
            samples: 2000,
            seed: 42,
        };
        b.iter(|| {
            expected_log_sum(
                &f.chain,
                &f.bundle,
                f.potential.as_ref(),
                200,
                1,
                mode,
                &budget,
            )
            .unwrap()
        })
    });
    group.finish();
}

fn measures(c: &mut Criterion) {
    let g = golden_mean();
    let parry = parry_measure();
    let budget = Budget::default();
    c.bench_function("golden-mean cylinder entropy n=12", |b| {
        b.iter(|| {
            parry
                .cylinder_entropy(&g.chain, &g.bundle, black_box(12), &budget)
                .unwrap()
        })
    });
}

fn bowen(c: &mut Criterion) {
    let (chain, bundle, cocycle) = scalar_two_shift_system();
    let cocycle = Arc::clone(&cocycle);
    let budget = Budget::default();
    let settings = BowenSettings::exact(12, 1, 2.0);
    c.bench_function("scalar two-shift dimension root n=12", |b| {
        b.iter(|| dimension_root(&chain, &bundle, &cocycle, &settings, &budget).unwrap())
    });
}

criterion_group!(benches, partition_sums, expected_pressure, measures, bowen);
criterion_main!(benches);
