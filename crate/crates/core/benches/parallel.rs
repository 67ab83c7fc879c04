//! Sequential vs rayon execution of the three data-parallel hot loops.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ghost_imaging::imaging::{analytic_image, ObjectMask};
use ghost_imaging::montecarlo::{empirical_ghost_image, FieldEnsemble};
use ghost_imaging::propagation::{propagate_numeric, source_kernel};
use ghost_imaging::{Axis, Bucket, CorrelationKind, DetectorModel, Execution, GsmSource, OpticalPath, PlaneGrid, SourceClass};
use std::hint::black_box;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn thermal(rho: f64) -> GsmSource {
    GsmSource::new(1e6, 1e-3, rho, 1e-9, SourceClass::Thermal).unwrap()
}

fn bench_image(c: &mut Criterion) {
    let grid = PlaneGrid::square(Axis::with_extent(256, 1.28e-3).unwrap());
    let obj = ObjectMask::letter(grid, 'P', 1e-3).unwrap();
    let det = DetectorModel::new(1.0, 1e-10, grid, Bucket::Full).unwrap();
    let path = OpticalPath::free_space(0.005, 1e7).unwrap();
    let src = thermal(1e-4);
    let mut g = c.benchmark_group("analytic_image_256");
    for (name, ex) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &ex, |b, &ex| {
            b.iter(|| black_box(analytic_image(&src, &path, &obj, &det, ex).unwrap()))
        });
    }
    g.finish();
}

fn bench_propagation(c: &mut Criterion) {
    let src = thermal(1e-4);
    let path = OpticalPath::free_space(100.0, 1e7).unwrap();
    let input = Axis::with_extent(256, 8e-3).unwrap();
    let output = Axis::with_extent(256, 1.6).unwrap();
    let k = source_kernel(&src, CorrelationKind::PhaseInsensitive).unwrap().sample_line(input).unwrap();
    let mut g = c.benchmark_group("propagate_numeric_256");
    g.sample_size(10);
    for (name, ex) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &ex, |b, &ex| {
            b.iter(|| black_box(propagate_numeric(&k, &path, output, ex).unwrap()))
        });
    }
    g.finish();
}

fn bench_monte_carlo(c: &mut Criterion) {
    let src = thermal(2e-4);
    let path = OpticalPath::free_space(0.1, 1e7).unwrap();
    let grid = PlaneGrid::line(Axis::with_extent(1024, 4e-3).unwrap());
    let obj = ObjectMask::double_slit(grid, 2e-4, 6e-4, 1.0).unwrap();
    let det = DetectorModel::new(1.0, 1e-14, PlaneGrid::line(Axis::new(41, 2e-5).unwrap()), Bucket::Full).unwrap();
    let ens = FieldEnsemble::new(&src, grid, 512, 1).unwrap();
    let mut g = c.benchmark_group("monte_carlo_512_snapshots");
    g.sample_size(10);
    for (name, ex) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &ex, |b, &ex| {
            b.iter(|| black_box(empirical_ghost_image(&ens, &path, &obj, &det, None, ex).unwrap()))
        });
    }
    g.finish();
}

criterion_group!(benches, bench_image, bench_propagation, bench_monte_carlo);
criterion_main!(benches);
