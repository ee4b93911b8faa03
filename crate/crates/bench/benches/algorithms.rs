use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hpcai500_core::characterization::{kmeans, tsne, FeatureMatrix};
use hpcai500_core::ingest::{parse_runs, runs_to_string};
use hpcai500_core::scaling::CommModel;
use hpcai500_core::scoring::score_run;
use hpcai500_core::{registry_lookup, PrecisionMode, RunRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn runs(n: usize) -> Vec<RunRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    (0..n)
        .map(|i| RunRecord {
            run_id: format!("run-{i}"),
            benchmark_id: "image_classification".into(),
            system_name: format!("system-{}", i % 17),
            accelerator_count: 8 << (i % 5),
            precision_mode: PrecisionMode::Mixed,
            comm_compression: i % 2 == 0,
            sustained_flops: rng.random_range(1e13..1e17),
            achieved_quality: rng.random_range(0.70..0.78),
            epochs_run: 90,
            wall_clock_seconds: rng.random_range(1e3..1e5),
            seed: Some(i as i64),
        })
        .collect()
}

fn features(n: usize, d: usize) -> FeatureMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let rows = (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(0.0..1.0)).collect())
        .collect();
    FeatureMatrix::from_rows(rows)
        .unwrap()
        .standardize()
        .unwrap()
}

fn bench_scoring(c: &mut Criterion) {
    let spec = registry_lookup("image_classification").unwrap();
    let runs = runs(1000);
    c.bench_function("score_run x1000", |b| {
        b.iter(|| {
            for run in &runs {
                black_box(score_run(black_box(run), &spec).unwrap());
            }
        })
    });
}

fn bench_ingest(c: &mut Criterion) {
    let text = runs_to_string(&runs(1000));
    c.bench_function("parse_runs 1000 lines", |b| {
        b.iter(|| parse_runs(black_box(text.as_bytes())).unwrap())
    });
}

fn bench_kmeans(c: &mut Criterion) {
    let mut group = c.benchmark_group("kmeans k=3");
    for n in [17, 200, 2000] {
        let m = features(n, 5);
        group.bench_with_input(BenchmarkId::from_parameter(n), &m, |b, m| {
            b.iter(|| kmeans(m, 3, 42).unwrap())
        });
    }
    group.finish();
}

fn bench_tsne(c: &mut Criterion) {
    let mut group = c.benchmark_group("tsne");
    group.sample_size(10);
    for n in [17, 100] {
        let m = features(n, 5);
        group.bench_with_input(BenchmarkId::from_parameter(n), &m, |b, m| {
            b.iter(|| tsne(m, 4.0, 42).unwrap())
        });
    }
    group.finish();
}

fn bench_comm_model(c: &mut Criterion) {
    let model = CommModel::new(1.2e9, 0.5, 1.5e11, 1.25e10, 8).unwrap();
    c.bench_function("predict p=1..1024", |b| {
        b.iter(|| {
            (1..=1024)
                .map(|p| model.predict(black_box(p)).efficiency)
                .sum::<f64>()
        })
    });
}

criterion_group!(
    benches,
    bench_scoring,
    bench_ingest,
    bench_kmeans,
    bench_tsne,
    bench_comm_model
);
criterion_main!(benches);
