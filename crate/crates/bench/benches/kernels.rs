use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use elgauss_bench::{ellipse_pair, jittered_board};
use elgauss_core::align::optimal_shifts;
use elgauss_core::ellipse::ellipse_to_gaussian;
use elgauss_core::fit::{fit_ellipse, FitConfig, FitMetric};
use elgauss_core::iou::{iou_grid, iou_oracle};
use elgauss_core::metrics::{kl_divergence, metric_gradient, spd_sqrt, wasserstein2_squared};
use elgauss_core::{AlignConfig, Ellipse, Mat2, MetricKind};

fn metrics(c: &mut Criterion) {
    let (a, b) = ellipse_pair(40.0);
    let (ga, gb) = (ellipse_to_gaussian(&a).unwrap(), ellipse_to_gaussian(&b).unwrap());
    c.bench_function("spd_sqrt", |bench| {
        bench.iter(|| spd_sqrt(black_box(Mat2::new(5.0, 2.0, 2.0, 3.0))))
    });
    c.bench_function("w2_squared", |bench| bench.iter(|| wasserstein2_squared(black_box(&ga), black_box(&gb))));
    c.bench_function("kl", |bench| bench.iter(|| kl_divergence(black_box(&ga), black_box(&gb))));
    c.bench_function("w2_gradient", |bench| {
        bench.iter(|| metric_gradient(black_box(&a), black_box(&b), MetricKind::W2Squared))
    });
}

fn iou(c: &mut Criterion) {
    let mut group = c.benchmark_group("iou_grid");
    for size in [10.0, 50.0, 200.0] {
        let (a, b) = ellipse_pair(size);
        group.bench_with_input(BenchmarkId::from_parameter(size), &(a, b), |bench, (a, b)| {
            bench.iter(|| iou_grid(black_box(a), black_box(b)))
        });
    }
    group.finish();
    let (a, b) = ellipse_pair(50.0);
    c.bench_function("iou_oracle_2048", |bench| bench.iter(|| iou_oracle(black_box(&a), black_box(&b), 2048)));
}

fn align(c: &mut Criterion) {
    let mut group = c.benchmark_group("optimal_shifts");
    group.sample_size(10);
    for width in [16, 64] {
        let gray = jittered_board(width);
        group.bench_with_input(BenchmarkId::from_parameter(width), &gray, |bench, gray| {
            bench.iter(|| optimal_shifts(black_box(gray), &AlignConfig::default()))
        });
    }
    group.finish();
}

fn fit(c: &mut Criterion) {
    let target = Ellipse::new(100.0, 100.0, 30.0, 15.0, 0.4).unwrap();
    let init = Ellipse::new(110.0, 110.0, 45.0, 22.5, 0.7).unwrap();
    let mut group = c.benchmark_group("fit_ellipse");
    for metric in [FitMetric::W2Squared, FitMetric::Kl] {
        let cfg = FitConfig {
            metric,
            ..FitConfig::default()
        };
        group.bench_function(metric.to_string(), |bench| {
            bench.iter(|| fit_ellipse(black_box(&init), black_box(&target), &cfg))
        });
    }
    group.finish();
}

criterion_group!(benches, metrics, iou, align, fit);
criterion_main!(benches);
