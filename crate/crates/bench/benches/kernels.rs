use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use pencil_kde::cluster::{kmeans, variance_floor};
use pencil_kde::config::reference_regions;
use pencil_kde::diffusion::{deposit_empirical, integrate, rhs, DiffusionProblem, FilterParams, SolverConfig};
use pencil_kde::fields::{nu_field, stationary_density, ProjectionWorkspace, RadialProfile};
use pencil_kde::pencil::{build_pencil, generalized_eigenvalues};
use pencil_kde::pilot::{pilot_potential, PilotConfig};
use pencil_kde::{RngConfig, ScalarField};
use pencil_kde_bench::*;

fn eigensolve(c: &mut Criterion) {
    let reps = reference_replicates(1.0, 1);
    let pencil = build_pencil(&reps.data[0]).unwrap();
    c.bench_function("zggev_37x37", |b| {
        b.iter(|| generalized_eigenvalues(black_box(&pencil), 0).unwrap())
    });
}

fn residual_field(c: &mut Criterion) {
    let reps = reference_replicates(1.0, 1);
    let samples = reference_samples(&reps);
    let ws = ProjectionWorkspace::new(&reps.mean_signal, &fixed_nodes(&samples[0]));
    let mut group = c.benchmark_group("nu_field");
    for m in [16, 32] {
        let grid = region_grid(m);
        group.bench_with_input(BenchmarkId::from_parameter(m), &grid, |b, g| {
            b.iter(|| nu_field(&ws, g))
        });
    }
    group.finish();
}

fn operator(c: &mut Criterion) {
    let grid = region_grid(32);
    let p = stationary_density(&grid, RadialProfile::Cauchy).unwrap();
    let a = ScalarField::from_fn(&grid, |x, y| 0.01 * (1.0 + x * x + y * y));
    let init = ScalarField::from_fn(&grid, |x, y| (-20.0 * ((x - 0.25).powi(2) + (y - 0.9).powi(2))).exp());
    let problem = DiffusionProblem::new(a, &p, FilterParams::new(&grid, 1.6, 0.02).unwrap(), init).unwrap();
    c.bench_function("rhs_32x32", |b| b.iter(|| rhs(black_box(&problem.initial), &problem)));
    c.bench_function("dopri5_smooth_32x32", |b| {
        b.iter(|| integrate(&problem, 1e-3, &SolverConfig::default()).unwrap())
    });
    let pts = pooled_region(&reference_samples(&reference_replicates(1.0, 10)));
    let zs: Vec<_> = pts.iter().map(|p| p.z).collect();
    c.bench_function("deposit_32x32", |b| {
        b.iter(|| deposit_empirical(&zs, 10, &grid, &p).unwrap())
    });
}

fn clustering(c: &mut Criterion) {
    let samples = reference_samples(&reference_replicates(1.0, 10));
    let pts = pooled_region(&samples);
    let floor = variance_floor(&reference_regions()[1]);
    c.bench_function("kmeans_k4", |b| {
        b.iter(|| kmeans(black_box(&pts), 4, 10, floor, &RngConfig::new(1, "bench")).unwrap())
    });
}

fn pilot(c: &mut Criterion) {
    let reps = reference_replicates(1.0, 2);
    let grid = region_grid(12);
    let cfg = PilotConfig::for_model(74, 1.0);
    c.bench_function("pilot_potential_12x12_r2", |b| {
        b.iter(|| pilot_potential(&reps, &grid, &cfg).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = eigensolve, residual_field, operator, clustering, pilot
}
criterion_main!(benches);
