//! Sequential vs rayon execution of the embarrassingly parallel sweeps.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use otflow::convexity::{certify, counterexample, CertifyOptions};
use otflow::energy::EnergySpec;
use otflow::par::map_range;
use otflow::transport::w2_distance;
use otflow::{Execution, Grid, PeriodicDensity};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn w2_batch(c: &mut Criterion) {
    let grid = Grid::new(256).unwrap();
    let pairs: Vec<(PeriodicDensity, PeriodicDensity)> = (0..16)
        .map(|i| {
            let a = PeriodicDensity::sine(grid, 0.3, 1 + i % 3).unwrap();
            let b = PeriodicDensity::sine(grid, -0.2, 1 + i % 5).unwrap().rotate(0.01 * i as f64).unwrap();
            (a, b)
        })
        .collect();
    let mut group = c.benchmark_group("w2_batch_16x256");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |bch| {
            bch.iter(|| map_range(exec, pairs.len(), |i| w2_distance(&pairs[i].0, &pairs[i].1).unwrap()))
        });
    }
    group.finish();
}

fn certify_sampling(c: &mut Criterion) {
    let center = PeriodicDensity::uniform(Grid::new(64).unwrap());
    let mut group = c.benchmark_group("certify_8_samples");
    group.sample_size(10);
    for (name, exec) in MODES {
        let opts = CertifyOptions { samples: 8, exec, ..CertifyOptions::default() };
        group.bench_function(BenchmarkId::from_parameter(name), |bch| {
            bch.iter(|| certify(&EnergySpec::Dirichlet, black_box(&center), 1.0, 0.5, 0.05, &opts).unwrap())
        });
    }
    group.finish();
}

fn counterexample_sweep(c: &mut Criterion) {
    let grid = Grid::new(4096).unwrap();
    let hs = [1u32, 2, 4, 8, 16, 32, 64, 128];
    let mut group = c.benchmark_group("counterexample_8_scales");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |bch| {
            bch.iter(|| map_range(exec, hs.len(), |i| counterexample(hs[i], grid).unwrap().a_value))
        });
    }
    group.finish();
}

criterion_group!(benches, w2_batch, certify_sampling, counterexample_sweep);
criterion_main!(benches);
