use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use hiercal::gp::{FitConfig, GpSurrogate};
use hiercal::hier::HierPrior;
use hiercal::lhs::lhs_design;
use hiercal::par;
use hiercal::seed;
use hiercal::testbed::canonical_simulator;

fn surrogate() -> GpSurrogate {
    let problem = canonical_simulator();
    let inputs = lhs_design(60, 6, 1).unwrap().points;
    let targets = inputs.iter().map(|l| problem.eval(&[0.4, 0.5, 0.6], l, 0)).collect();
    GpSurrogate::fit(
        inputs,
        targets,
        &FitConfig {
            n_starts: 2,
            ..Default::default()
        },
    )
    .unwrap()
}

fn bank_predictions(c: &mut Criterion) {
    let gp = surrogate();
    let prior = HierPrior::new(4, 6);
    let mut rng = seed::rng(2);
    let lambdas: Vec<Vec<f64>> = (0..4000).map(|_| prior.sample(&[0.5, 0.5], &mut rng)).collect();

    let mut group = c.benchmark_group("gp_predict_bank");
    for n in [500usize, 4000] {
        group.bench_with_input(BenchmarkId::new("parallel", n), &n, |b, &n| {
            b.iter(|| par::map_range(n, |i| gp.predict(black_box(&lambdas[i]))))
        });
        group.bench_with_input(BenchmarkId::new("sequential", n), &n, |b, &n| {
            b.iter(|| par::map_range_seq(n, |i| gp.predict(black_box(&lambdas[i]))))
        });
    }
    group.finish();
}

criterion_group!(benches, bank_predictions);
criterion_main!(benches);
