//! Criterion benches comparing the rayon-backed data-parallel paths against
//! the sequential fallback for the hottest inner loops.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use num_complex::Complex64;

use geobeam_core::dbar::{cauchy_solve, CauchyKind, PlaneField};
use geobeam_core::fields::{mollify_one_form, SampledOneForm};
use geobeam_core::geometry::MetricChart;
use geobeam_core::grid::GridSpec;
use geobeam_core::ExecMode;

fn bench_cauchy(c: &mut Criterion) {
    let mut group = c.benchmark_group("cauchy_solve");
    for n in [64usize, 128] {
        let grid = GridSpec::new(&[-1.5, -1.5], &[1.5, 1.5], &[n, n]);
        let vals: Vec<Complex64> = (0..grid.len())
            .map(|i| {
                let x = grid.node(i);
                let r2 = (x[0] * x[0] + x[1] * x[1]) / 0.08;
                if r2 < 18.0 {
                    Complex64::new((-r2).exp(), 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();
        let g = PlaneField::new(grid, vals);
        for (label, mode) in [
            ("parallel", ExecMode::Parallel),
            ("sequential", ExecMode::Sequential),
        ] {
            group.bench_with_input(BenchmarkId::new(label, n), &g, |b, g| {
                b.iter(|| cauchy_solve(g, CauchyKind::Dbar, mode).unwrap());
            });
        }
    }
    group.finish();
}

fn bench_mollify(c: &mut Criterion) {
    let mut group = c.benchmark_group("mollify");
    let chart = MetricChart::flat_slab(&[-1.0, -1.0], &[1.0, 1.0]);
    let grid = GridSpec::new(&[-1.0, -1.0], &[1.0, 1.0], &[257, 257]);
    let a = SampledOneForm::from_fn(&chart, &grid, |x| {
        let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
        vec![
            Complex64::new((0.5 - r).max(0.0), 0.0),
            Complex64::new(0.0, 0.0),
        ]
    });
    for (label, mode) in [
        ("parallel", ExecMode::Parallel),
        ("sequential", ExecMode::Sequential),
    ] {
        group.bench_function(label, |b| {
            b.iter(|| mollify_one_form(&a, 0.1, mode).unwrap());
        });
    }
    group.finish();
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = bench_cauchy, bench_mollify
}
criterion_main!(benches);
