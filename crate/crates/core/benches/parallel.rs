use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use sigma_forest::experiments::{compare_pinning_sweep, run_cell, ExperimentConfig};
use sigma_forest::graph::{augment, Graph, Pinning};
use sigma_forest::oracle::{bundled_corpus, run_suite};
use sigma_forest::parallel::Execution;
use sigma_forest::sampler::McmcConfig;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn config(execution: Execution, samples: usize, chains: usize) -> ExperimentConfig {
    ExperimentConfig {
        mcmc: McmcConfig {
            n_samples: samples,
            burn_in: 1_000,
            seed: 1,
            sample_trees: false,
            ..McmcConfig::default()
        },
        chains,
        execution,
        permutations: 199,
    }
}

fn oracle_suite(c: &mut Criterion) {
    let instances = bundled_corpus(7, 1).unwrap();
    let mut group = c.benchmark_group("oracle_suite");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| run_suite(&instances, exec).unwrap())
        });
    }
    group.finish();
}

fn chains(c: &mut Criterion) {
    let g = Graph::cycle(4, 1.0).unwrap();
    let ag = augment(&g, &Pinning::uniform(4, 1.0, 0.1).unwrap()).unwrap();
    let mut group = c.benchmark_group("chains_8x5000");
    group.sample_size(10);
    for (name, exec) in MODES {
        let cfg = config(exec, 5_000, 8);
        group.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| run_cell(&ag, &cfg, 7).unwrap()));
    }
    group.finish();
}

fn sweep_cells(c: &mut Criterion) {
    let g = Graph::path(2, 1.0).unwrap();
    let eps = [0.2, 0.1, 0.05, 0.02];
    let mut group = c.benchmark_group("sweep_4eps");
    group.sample_size(10);
    for (name, exec) in MODES {
        let cfg = config(exec, 2_000, 2);
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| compare_pinning_sweep(&g, &[1.0, 1.0], 0, 1, &eps, &cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, oracle_suite, chains, sweep_cells);
criterion_main!(benches);
