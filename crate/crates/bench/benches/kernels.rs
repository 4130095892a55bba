use criterion::{black_box, criterion_group, criterion_main, Criterion};

use conelab::cone::circle_spectrum;
use conelab::fem::{assemble, solve_dirichlet_assembled};
use conelab::heat::heat_apply;
use conelab::weak::{distributional_laplacian, Geometry, TestFunction};
use conelab_bench::{ball_mesh, graph_coefficient, saddle_grid};

fn fem(c: &mut Criterion) {
    let a = graph_coefficient();
    let mesh = ball_mesh(24);
    let k = assemble(&a, &mesh).unwrap();
    c.bench_function("assemble_ball_24", |b| b.iter(|| assemble(black_box(&a), &mesh).unwrap()));
    c.bench_function("dirichlet_pcg_ball_24", |b| {
        b.iter(|| solve_dirichlet_assembled(&k, &mesh, |x| x[0] * x[1]).unwrap())
    });
}

fn heat(c: &mut Criterion) {
    let v = saddle_grid(1.0 / 128.0);
    c.bench_function("heat_apply_2d_h128", |b| b.iter(|| heat_apply(black_box(&v), 0.01).unwrap()));
}

fn pairing(c: &mut Criterion) {
    let v = saddle_grid(1.0 / 64.0);
    let phi = TestFunction::bump(&[0.1, -0.2], 0.5, Geometry::Flat(2)).unwrap();
    c.bench_function("pairing_grid_2d", |b| b.iter(|| distributional_laplacian(black_box(&v), &phi).unwrap()));
}

fn spectrum(c: &mut Criterion) {
    c.bench_function("circle_spectrum_64", |b| b.iter(|| circle_spectrum(black_box(2.5), 64).unwrap()));
}

criterion_group!(benches, fem, heat, pairing, spectrum);
criterion_main!(benches);
