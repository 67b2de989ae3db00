use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use trustconnect::experiment::{
    run_detection_trials, run_sweep_with, sweep_snapshot, DetectionTrialConfig, SweepSpec,
};
use trustconnect::{
    generate_random, synthesize_snapshot, EpsilonDistribution, Execution, ScenarioSpec, TrustParams,
};

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn fixture_sweep(c: &mut Criterion) {
    let spec = SweepSpec::default();
    let mut group = c.benchmark_group("fixture_sweep_4x4");
    for (name, exec) in MODES {
        group.bench_function(name, |b| b.iter(|| run_sweep_with(black_box(&spec), exec).unwrap()));
    }
    group.finish();
}

fn large_sweep(c: &mut Criterion) {
    let graph = generate_random(500, 0.02, EpsilonDistribution::default(), 1).unwrap();
    let scenario = ScenarioSpec::seeded_truth(&graph, 10.0, 100.0, 1).with_noise(0.1);
    let snapshot = synthesize_snapshot(&graph, &scenario).unwrap();
    let ks: Vec<f64> = (1..=8).map(|i| i as f64 * 0.25).collect();
    let alphas: Vec<f64> = (1..=8).map(|i| i as f64 * 0.01).collect();
    let base = TrustParams::default();
    let mut group = c.benchmark_group("sweep_500_nodes_8x8");
    for (name, exec) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| sweep_snapshot(&graph, &snapshot, &ks, &alphas, &base, exec).unwrap())
        });
    }
    group.finish();
}

fn detection_trials(c: &mut Criterion) {
    let mut group = c.benchmark_group("detection_trials");
    group.sample_size(20);
    for trials in [100usize, 400] {
        let cfg = DetectionTrialConfig {
            trials,
            ..DetectionTrialConfig::default()
        };
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, trials), &cfg, |b, cfg| {
                b.iter(|| run_detection_trials(cfg, exec).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, fixture_sweep, large_sweep, detection_trials);
criterion_main!(benches);
