//! Sequential against rayon-parallel execution of the batch workloads.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use mobipred::experiment::{multi_seed_eval, GridExperimentConfig, PaperEvalConfig};
use mobipred::par::Execution;
use mobipred::predictor::{grid_select, GridSpec};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn grid(c: &mut Criterion) {
    let mut cfg = GridExperimentConfig {
        n_series: 4,
        samples: 120,
        split: 60,
        ..Default::default()
    };
    cfg.rwm.duration = 1200.0;
    cfg.net = cfg.net.with_epochs(20);
    let series = cfg.series().unwrap();
    let mut group = c.benchmark_group("grid_select");
    group.sample_size(10);
    for (name, execution) in MODES {
        let spec = GridSpec {
            base: cfg.net,
            split: cfg.split,
            margin: cfg.margin,
            execution,
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| grid_select(black_box(&series), 4..=7, 3..=5, &spec).unwrap())
        });
    }
    group.finish();
}

fn seeds(c: &mut Criterion) {
    let mut cfg = PaperEvalConfig::default();
    cfg.net = cfg.net.with_epochs(50);
    let seeds: Vec<u64> = (0..4).collect();
    let mut group = c.benchmark_group("multi_seed_eval");
    group.sample_size(10);
    for (name, execution) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| multi_seed_eval(black_box(&cfg), &seeds, execution).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, grid, seeds);
criterion_main!(benches);
