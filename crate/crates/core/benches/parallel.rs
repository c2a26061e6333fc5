//! Sequential against parallel execution of the path-level kernels.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use smplab_core::adjoint::{solve_adjoint1, RegressionBasis};
use smplab_core::forward::{simulate_state, PathEnsemble};
use smplab_core::scenario::{load_scenario, Scenario};
use smplab_core::Execution;

fn bilinear16(paths: usize) -> Scenario {
    let mut s = load_scenario(concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/bilinear16.cfg")).expect("fixture loads");
    s.run.paths = paths;
    s
}

fn modes() -> Vec<Execution> {
    if cfg!(feature = "parallel") {
        vec![Execution::Sequential, Execution::Parallel]
    } else {
        vec![Execution::Sequential]
    }
}

fn forward(c: &mut Criterion) {
    let s = bilinear16(2000);
    let e = PathEnsemble::generate(s.seed, s.run.paths, s.n_t, s.k(), s.dt(), Execution::Sequential).unwrap();
    let mut g = c.benchmark_group("simulate_state");
    g.sample_size(10);
    for exec in modes() {
        g.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &exec, |b, &exec| {
            b.iter(|| simulate_state(&s, &s.reference, &e, exec).unwrap())
        });
    }
    g.finish();
}

fn backward(c: &mut Criterion) {
    let s = bilinear16(2000);
    let e = PathEnsemble::generate(s.seed, s.run.paths, s.n_t, s.k(), s.dt(), Execution::Sequential).unwrap();
    let xbar = simulate_state(&s, &s.reference, &e, Execution::Sequential).unwrap();
    let mut g = c.benchmark_group("solve_adjoint1");
    g.sample_size(10);
    for exec in modes() {
        g.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &exec, |b, &exec| {
            b.iter(|| solve_adjoint1(&s, &xbar, &e, RegressionBasis::default(), exec).unwrap())
        });
    }
    g.finish();
}

fn ensemble(c: &mut Criterion) {
    let s = bilinear16(2000);
    let mut g = c.benchmark_group("path_ensemble");
    g.sample_size(10);
    for exec in modes() {
        g.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &exec, |b, &exec| {
            b.iter(|| PathEnsemble::generate(s.seed, s.run.paths, s.n_t, s.k(), s.dt(), exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, ensemble, forward, backward);
criterion_main!(benches);
