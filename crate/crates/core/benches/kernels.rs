//! Hot kernels. Run once with default features (rayon) and once with
//! `--no-default-features` (sequential) and compare the reports.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

use slosh::chebyshev::{to_coeffs_with, ChebGrid, GridFunction, TransformPath};
use slosh::control::{ControlProblem, ControlWindow, TargetState};
use slosh::elliptic::{eigenmodes, GalerkinSystem};
use slosh::exec::is_parallel;
use slosh::operator::NonlocalOperator;
use slosh::ChebCoeffs;

fn label(name: &str) -> String {
    format!("{name}/{}", if is_parallel() { "rayon" } else { "seq" })
}

fn transforms(c: &mut Criterion) {
    let mut group = c.benchmark_group(label("to_coeffs"));
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for size in [256usize, 2048] {
        let grid = ChebGrid::shared(size).unwrap();
        let f = GridFunction::new(&grid, (0..size).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .unwrap();
        group.bench_with_input(BenchmarkId::new("direct", size), &f, |b, f| {
            b.iter(|| to_coeffs_with(black_box(f), TransformPath::Direct))
        });
        group.bench_with_input(BenchmarkId::new("fast", size), &f, |b, f| {
            b.iter(|| to_coeffs_with(black_box(f), TransformPath::Fast))
        });
    }
    group.finish();
}

fn operator(c: &mut Criterion) {
    let mut group = c.benchmark_group(label("operator"));
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for size in [128usize, 512] {
        let op = NonlocalOperator::new(size).unwrap();
        let a = ChebCoeffs::new((0..size / 2).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let padded = a.resized(size);
        group.bench_with_input(BenchmarkId::new("spectral", size), &padded, |b, a| {
            b.iter(|| op.apply_spectral(black_box(a)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("quadrature", size), &a, |b, a| {
            b.iter(|| op.apply_quadrature(black_box(a)).unwrap())
        });
    }
    group.finish();
}

fn eigen(c: &mut Criterion) {
    let sys = GalerkinSystem::build(128).unwrap();
    c.bench_function(&label("eigenmodes_128"), |b| {
        b.iter(|| eigenmodes(black_box(&sys), 8).unwrap())
    });
}

fn control_gradient(c: &mut Criterion) {
    let sys = GalerkinSystem::build(24).unwrap();
    let window = ControlWindow::new(-0.6, -0.1, sys.grid()).unwrap();
    let problem = ControlProblem::new(&sys, &window, 4.0, 0.02).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let v = problem.random_control(&mut rng);
    let target = TargetState::new(ChebCoeffs::unit(2, 24), ChebCoeffs::unit(1, 24)).unwrap();
    c.bench_function(&label("control_gradient_24"), |b| {
        b.iter(|| problem.gradient(black_box(&v), &target, 0.0).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = transforms, operator, eigen, control_gradient
}
criterion_main!(benches);
