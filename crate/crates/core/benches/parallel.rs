use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mfgprice::config::ExperimentConfig;
use mfgprice::experiment::run_experiment;
use mfgprice::simulate::{
    martingale_test, simulate_agents, simulate_supply_price, AgentOptions, NoisePath,
};
use mfgprice::{derive_pricing_rule, solve_coefficients, Execution, ModelSpec};

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn particles(c: &mut Criterion) {
    let spec = ModelSpec::storage_target(0.0);
    let rule =
        derive_pricing_rule(&spec, Arc::new(solve_coefficients(&spec, 1e-3).unwrap())).unwrap();
    let noise = NoisePath::generate(42, 1.0, 1e-3).unwrap();
    let sp = simulate_supply_price(&spec, &rule, &noise).unwrap();
    let mut group = c.benchmark_group("particles");
    group.sample_size(10);
    for n in [10_000, 100_000] {
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, n), &n, |b, &n| {
                let opts = AgentOptions {
                    exec,
                    ..AgentOptions::new(n)
                };
                b.iter(|| simulate_agents(&spec, &rule, sp.clone(), &noise, opts).unwrap())
            });
        }
    }
    group.finish();
}

fn martingale(c: &mut Criterion) {
    let spec = ModelSpec::storage_target(0.0);
    let rule =
        derive_pricing_rule(&spec, Arc::new(solve_coefficients(&spec, 1e-3).unwrap())).unwrap();
    let mut group = c.benchmark_group("martingale_2000_paths");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| martingale_test(&spec, &rule, 2000, 1e-3, 42, exec).unwrap())
        });
    }
    group.finish();
}

fn preset(c: &mut Criterion) {
    let config = ExperimentConfig::fig1();
    let mut group = c.benchmark_group("storage_target_preset");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(name, |b| b.iter(|| run_experiment(&config, exec).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, particles, martingale, preset);
criterion_main!(benches);
