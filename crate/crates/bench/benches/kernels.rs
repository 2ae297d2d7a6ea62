use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use curvgas::conformal::{radial_liouville_solve, RadialCurvature, RadialMode, RadialOptions};
use curvgas::meanfield::{solve_canonical, SolverOptions};
use curvgas::sampler::{mcmc_run, EnsembleKind, EnsembleSpec, SystemSpec};
use curvgas::Domain;
use curvgas_bench::{sphere_grid, two_bumps};

fn kernel_apply(c: &mut Criterion) {
    let grid = sphere_grid(64);
    let op = grid.operator();
    let rho: Vec<f64> = grid.nodes().map(|x| 1.0 + 0.5 * x[2]).collect();
    c.bench_function("kernel_apply_s2_64x128", |b| b.iter(|| op.apply(black_box(&rho))));
}

fn canonical_solve(c: &mut Criterion) {
    let grid = sphere_grid(32);
    let field = two_bumps(&grid);
    let opts = SolverOptions::default();
    c.bench_function("solve_canonical_beta_m3_s2_32x64", |b| {
        b.iter(|| solve_canonical(black_box(-3.0), &field, &grid, &opts).unwrap())
    });
}

fn mcmc_sweeps(c: &mut Criterion) {
    let grid = sphere_grid(16);
    let system = SystemSpec::single_species(Domain::sphere(2), 32, two_bumps(&grid)).unwrap();
    let spec = EnsembleSpec::new(EnsembleKind::Canonical { beta: -2.0 }, system).unwrap();
    c.bench_function("mcmc_100_sweeps_n32", |b| b.iter(|| mcmc_run(&spec, 100, 10, black_box(1), 0.3).unwrap()));
}

fn radial_shoot(c: &mut Criterion) {
    let k = RadialCurvature::Constant { value: 1.0 };
    let opts = RadialOptions::default();
    c.bench_function("radial_shoot_k1", |b| {
        b.iter(|| radial_liouville_solve(&k, RadialMode::Shoot { u0: black_box(0.5) }, &opts).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = kernel_apply, canonical_solve, mcmc_sweeps, radial_shoot
}
criterion_main!(benches);
