use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use selfreq::{solve_threshold, strategy2_pmf_convolution, strategy2_pmf_partitions, NullModelParams, Strategy};

fn thresholds(c: &mut Criterion) {
    let mut g = c.benchmark_group("solve_threshold");
    for &(f, fnn, t, k) in &[(500, 25, 50, 40.0), (5000, 250, 500, 30.0)] {
        for s in [Strategy::PerNode, Strategy::PerTree] {
            let p = NullModelParams::new(f, fnn, t, k, s).unwrap();
            g.bench_function(format!("F={f} T={t} {s}"), |b| b.iter(|| solve_threshold(black_box(&p), 0.01)));
        }
    }
    g.finish();
}

fn per_tree_routes(c: &mut Criterion) {
    let p = NullModelParams::new(500, 25, 50, 40.0, Strategy::PerTree).unwrap();
    let mut g = c.benchmark_group("per_tree_pmf");
    g.bench_function("partitions k=40", |b| b.iter(|| strategy2_pmf_partitions(black_box(&p), 40)));
    g.bench_function("convolution k<=40", |b| b.iter(|| strategy2_pmf_convolution(black_box(&p), 40)));
    g.finish();
}

criterion_group!(benches, thresholds, per_tree_routes);
criterion_main!(benches);
