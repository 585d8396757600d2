//! Parallel-vs-sequential comparison of the two data-parallel workloads:
//! Monte Carlo sampling and mu-optimized distance sweeps.
//!
//! Run with `cargo bench -p netkit`. Build with `--no-default-features` to
//! confirm the sequential fallback compiles to the same numbers.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use netkit::exec::{self, Mode};
use netkit::montecarlo::sample_protocol_with;
use netkit::rates::{optimize_mu, DistanceMap, Protocol, Scenario, MU_RANGE};
use netkit::{eta_from_distance, link_params, NetworkConfig};

fn mc_config() -> NetworkConfig {
    NetworkConfig::new(3, link_params(20.0, 0.8, 0.01).unwrap()).unwrap()
}

fn bench_mc_sampling(c: &mut Criterion) {
    let cfg = mc_config();
    let mut group = c.benchmark_group("mc_sample_n3_1e5");
    group.sample_size(10);
    group.bench_function("parallel", |b| {
        b.iter(|| black_box(sample_protocol_with(&cfg, 100_000, 42, Mode::Auto).unwrap()))
    });
    group.bench_function("sequential", |b| {
        b.iter(|| black_box(sample_protocol_with(&cfg, 100_000, 42, Mode::Sequential).unwrap()))
    });
    group.finish();
}

fn bench_distance_sweep(c: &mut Criterion) {
    let sc = Scenario::new(Protocol::Conference, 10, None, 0.05).unwrap();
    let grid: Vec<f64> = (0..48).map(|i| i as f64 * 0.004).collect();
    let sweep = |mode: Mode| {
        exec::map_with(mode, &grid, |&d| {
            let eta = eta_from_distance(&DistanceMap::new(d).unwrap());
            optimize_mu(&sc, eta, MU_RANGE).unwrap().1.rate
        })
    };
    let mut group = c.benchmark_group("distance_sweep_48pt");
    group.sample_size(10);
    group.bench_function("parallel", |b| b.iter(|| black_box(sweep(Mode::Auto))));
    group.bench_function("sequential", |b| {
        b.iter(|| black_box(sweep(Mode::Sequential)))
    });
    group.finish();
}

criterion_group!(benches, bench_mc_sampling, bench_distance_sweep);
criterion_main!(benches);
