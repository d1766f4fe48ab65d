use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nvcavity::dressed::{quadrature_map, DressedParams};
use nvcavity::grid::Axis;
use nvcavity::master::SystemParams;
use nvcavity::ops::HilbertLayout;
use nvcavity::par::Exec;
use nvcavity::spectrum::{odmr_map, OdmrReadout, SpectrumSolver, SpectrumSource};
use nvcavity::units::mhz;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn odmr(c: &mut Criterion) {
    let p = SystemParams::nv_default(HilbertLayout::new(2, 3).unwrap());
    let axis = Axis::new(mhz(-8.0), mhz(8.0), 8).unwrap();
    let mut group = c.benchmark_group("odmr_map_8x8");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| odmr_map(black_box(&p), &axis, &axis, OdmrReadout::SpinExcitation, exec).unwrap())
        });
    }
    group.finish();
}

fn homodyne(c: &mut Criterion) {
    let p = DressedParams::experimental_default();
    let s = Axis::new(mhz(-10.0), mhz(10.0), 401).unwrap();
    let dc = Axis::new(mhz(-2.0), mhz(2.0), 81).unwrap();
    let mut group = c.benchmark_group("quadrature_map_401x81");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| quadrature_map(black_box(&p), &s, &dc, exec).unwrap())
        });
    }
    group.finish();
}

fn spectrum(c: &mut Criterion) {
    let p = SystemParams::nv_default(HilbertLayout::new(2, 4).unwrap());
    let solver = SpectrumSolver::new(&p, SpectrumSource::Cavity).unwrap();
    let omegas = Axis::new(mhz(-10.0), mhz(10.0), 201).unwrap().values();
    let mut group = c.benchmark_group("spectrum_trace_201");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| solver.trace(black_box(&omegas), exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, odmr, homodyne, spectrum);
criterion_main!(benches);
