use std::hint::black_box;

use btlab_bench::{default_rule, picard_grids, smooth_pair};
use btlab_core::{mc_theorem1, picard_v, quad_u1, spectral_mode_amplitudes, ClockSpec, PdeSpec, ScalarField, Variant};
use criterion::{criterion_group, criterion_main, Criterion};

fn quadrature(c: &mut Criterion) {
    let (f, g) = smooth_pair();
    let rule = default_rule();
    c.bench_function("quad_u1 gauss/neg-cauchy", |b| {
        b.iter(|| quad_u1(&f, &g, black_box(1.0), &[0.2], &rule).unwrap())
    });
}

fn monte_carlo(c: &mut Criterion) {
    let (f, g) = smooth_pair();
    let clock = ClockSpec::new(1.0, 1.0, 100).unwrap();
    let mut group = c.benchmark_group("mc_theorem1");
    group.sample_size(10);
    for variant in [Variant::Btp, Variant::Ebtp] {
        group.bench_function(variant.to_string(), |b| {
            b.iter(|| mc_theorem1(&f, &g, 1.0, &[0.2], variant, &clock, black_box(2_000), 7).unwrap())
        });
    }
    group.finish();
}

fn feynman_kac(c: &mut Criterion) {
    let (f, pot) = smooth_pair();
    let (s_grid, x_grid) = picard_grids(1.0, 128, 128);
    let mut group = c.benchmark_group("picard_v");
    group.sample_size(10);
    group.bench_function("gauss/neg-cauchy", |b| {
        b.iter(|| picard_v(&f, &pot, &s_grid, x_grid, 50, 1e-10).unwrap())
    });
    group.finish();
}

fn spectral(c: &mut Criterion) {
    let spec = PdeSpec::btbm(ScalarField::cos(), ScalarField::cos());
    c.bench_function("spectral modes T1 cos", |b| {
        b.iter(|| spectral_mode_amplitudes(&spec, &[1], black_box(1.0), 10_000).unwrap())
    });
}

criterion_group!(benches, quadrature, monte_carlo, feynman_kac, spectral);
criterion_main!(benches);
