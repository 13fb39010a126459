use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use sicspin::hamiltonian::{deviation_sweep, exact_spectrum, phi_grid, sedor_correction_second_order};
use sicspin::placement::place_all;
use sicspin::refine::{refine, RefineConfig};
use sicspin::spinphys::{dipolar_coupling_alpha, dipolar_prefactor, Constants, Ms};
use sicspin::synth::{emit_telegraph, TelegraphSpec};
use sicspin::telegraph::{analyze, TelegraphConfig};
use sicspin_bench::{register25, strong_pair};

fn couplings(c: &mut Criterion) {
    let w = register25(0);
    let d = w.separations();
    let alpha = dipolar_prefactor(w.constants.gamma_si29, w.constants.gamma_si29);
    c.bench_function("dipolar/300 pairs", |b| {
        b.iter(|| d.iter().map(|v| dipolar_coupling_alpha(black_box(v), alpha).unwrap()).sum::<f64>())
    });
}

fn hamiltonian(c: &mut Criterion) {
    let spec = strong_pair(&Constants::default());
    c.bench_function("exact_spectrum/16x16", |b| b.iter(|| exact_spectrum(black_box(&spec)).unwrap()));
    c.bench_function("second_order/one manifold", |b| {
        b.iter(|| sedor_correction_second_order(black_box(&spec), Ms::PlusThreeHalves).unwrap())
    });
    let grid = phi_grid(12);
    c.bench_function("deviation_sweep/12x12", |b| b.iter(|| deviation_sweep(black_box(&spec), &grid, 2.3).unwrap()));
}

fn placement(c: &mut Criterion) {
    let w = register25(0);
    let mut g = c.benchmark_group("pipeline");
    g.sample_size(10);
    g.bench_function("place_all/25 spins", |b| {
        b.iter(|| place_all(black_box(&w.measurements), &w.lattice, &w.config, &w.constants).unwrap())
    });
    let sol = w.solution();
    g.bench_function("refine/25 spins", |b| {
        b.iter(|| refine(black_box(&sol), &w.measurements, &RefineConfig::default(), &w.constants).unwrap())
    });
    let (trace, _) = emit_telegraph(&TelegraphSpec::default(), 0).unwrap();
    g.bench_function("telegraph/200 s trace", |b| b.iter(|| analyze(black_box(&trace), &TelegraphConfig::default()).unwrap()));
    g.finish();
}

criterion_group!(benches, couplings, hamiltonian, placement);
criterion_main!(benches);
