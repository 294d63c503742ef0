use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nmcrc::corrections::{bootstrap_stability_with, BootstrapConfig};
use nmcrc::generators::{BumpConfig, GeneratorSpec, MonotoneConfig};
use nmcrc::harness::{run_experiment_with, ExperimentPlan, SplitMode};
use nmcrc::seed::substream;
use nmcrc::{Execution, Method, MethodConfig};

const MODES: [Execution; 2] = [Execution::Sequential, Execution::Parallel];

fn experiment(c: &mut Criterion) {
    let plan = ExperimentPlan {
        generator: GeneratorSpec::Monotone(MonotoneConfig {
            m: 64,
            ..Default::default()
        }),
        methods: vec![
            MethodConfig::new(Method::Crc, 0.1),
            MethodConfig::new(Method::CrcNm, 0.1),
            MethodConfig::new(Method::LossMono, 0.1),
        ],
        weighted: None,
        repetitions: 64,
        n_cal: 1000,
        n_test: 500,
        seed: 1,
        split: SplitMode::Fresh,
        pool_size: None,
    };
    let mut group = c.benchmark_group("run_experiment");
    group.sample_size(10);
    for exec in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &exec, |b, &exec| {
            b.iter(|| run_experiment_with(black_box(&plan), exec).unwrap())
        });
    }
    group.finish();
}

fn bootstrap(c: &mut Criterion) {
    let model = GeneratorSpec::Bump(BumpConfig {
        m: 50,
        reference_rows: 10_000,
        ..Default::default()
    })
    .build(2)
    .unwrap();
    let losses = model.draw(1000, &mut substream(2, "bench", 0)).unwrap().losses;
    let config = BootstrapConfig::default();
    let mut group = c.benchmark_group("bootstrap_stability");
    group.sample_size(10);
    for exec in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &exec, |b, &exec| {
            b.iter(|| bootstrap_stability_with(black_box(&losses), 0.1, &config, 5, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, experiment, bootstrap);
criterion_main!(benches);
