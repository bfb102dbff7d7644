use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mlmc_sr::driver::{run_mlmc_sr, RunOptions};
use mlmc_sr::estimator::{EstimatorConfig, LevelSchedule};
use mlmc_sr::models::{EllipticFluxModel, EllipticParams, SyntheticNormalModel};
use mlmc_sr::par::{map_chunks, Execution, DEFAULT_CHUNK};
use mlmc_sr::refinement::solve_selective;
use mlmc_sr::rng::realization_key;
use std::hint::black_box;

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn full_run(c: &mut Criterion) {
    let model = SyntheticNormalModel::new(0.1, 2.0).unwrap();
    let cfg = EstimatorConfig::new(0.8, 0.02, 0.5, 2.0, 10, 1.0).unwrap();
    let mut group = c.benchmark_group("mlmc_sr_run_q2_eps0.02");
    group.sample_size(10);
    for (name, execution) in MODES {
        let opts = RunOptions {
            execution,
            ..Default::default()
        };
        group.bench_function(name, |b| {
            b.iter(|| run_mlmc_sr(&model, &cfg, black_box(1), &opts).unwrap())
        });
    }
    group.finish();
}

fn selective_samples(c: &mut Criterion) {
    let synthetic = SyntheticNormalModel::new(0.1, 2.0).unwrap();
    let elliptic = EllipticFluxModel::new(EllipticParams {
        master_cells: 256,
        ..Default::default()
    })
    .unwrap();
    let sched = LevelSchedule::new(0.5, 2.0).unwrap();
    let mut group = c.benchmark_group("selective_samples_level6");
    group.sample_size(10);
    for (name, execution) in MODES {
        group.bench_with_input(BenchmarkId::new("synthetic", name), &execution, |b, &exec| {
            b.iter(|| {
                map_chunks(0..100_000, DEFAULT_CHUNK, exec, |r| {
                    r.map(|i| {
                        solve_selective(&synthetic, realization_key(2, 6, i), 6, 0.8, &sched, Default::default())
                            .unwrap()
                            .cost
                    })
                    .sum::<f64>()
                })
            })
        });
        group.bench_with_input(BenchmarkId::new("elliptic", name), &execution, |b, &exec| {
            b.iter(|| {
                map_chunks(0..2_000, 256, exec, |r| {
                    r.map(|i| {
                        solve_selective(&elliptic, realization_key(2, 6, i), 6, 1.0, &sched, Default::default())
                            .unwrap()
                            .cost
                    })
                    .sum::<f64>()
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, full_run, selective_samples);
criterion_main!(benches);
