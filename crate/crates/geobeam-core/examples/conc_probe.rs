//! Scratch probe for concentration limits and torus mixed terms.

use num_complex::Complex64;

use geobeam_core::beam::{
    assemble_quasimode, geodesic_limit, slice_integral, slice_integral_grid, BeamKind,
    BeamOptions, Pairing,
};
use geobeam_core::fields::{SampledOneForm, SemiclassicalParams};
use geobeam_core::geometry::{integrate_geodesic, pt, GeodesicOptions, MetricChart};
use geobeam_core::grid::GridSpec;

fn main() {
    let chart = MetricChart::euclidean_disk(1.0);
    let geo = integrate_geodesic(
        &chart,
        &pt(&[1.0, 0.0]),
        &pt(&[-1.0, 0.0]),
        &GeodesicOptions::default(),
    )
    .unwrap();
    let prod = MetricChart::product(&chart, -1.0, 1.0);
    let agrid = GridSpec::new(&[-1.3, -1.3, -1.3], &[1.3, 1.3, 1.3], &[17, 17, 17]);
    let a = SampledOneForm::zeros(&prod, &agrid);
    // alpha = "dt" along the diameter: the diameter runs in -x direction, so
    // alpha = -dx1' in chart coordinates (transversal axis u).
    let alpha = SampledOneForm::from_fn(&prod, &agrid, |_| {
        vec![
            Complex64::new(0.0, 0.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(0.0, 0.0),
        ]
    });
    let one = |_: &geobeam_core::geometry::Pt| Complex64::new(1.0, 0.0);

    for &lambda in &[0.0, 1.0] {
        let params = SemiclassicalParams::new(1e-3, lambda).unwrap();
        let opts = BeamOptions {
            delta_prime: 4.0,
            ..Default::default()
        };
        let t0 = std::time::Instant::now();
        let v = assemble_quasimode(
            &chart, &geo, &a, &params, BeamKind::Decaying, (-1.0, 1.0), None, &opts,
        )
        .unwrap();
        let w = assemble_quasimode(
            &chart, &geo, &a, &params, BeamKind::Growing, (-1.0, 1.0), None, &opts,
        )
        .unwrap();
        let fin = slice_integral(&v, &w, &one, 0.0, Pairing::Product, None).unwrap();
        let lim = geodesic_limit(&v, &w, &one, 0.0, Pairing::Product, None).unwrap();
        let closed = if lambda == 0.0 {
            Complex64::new(2.0, 0.0)
        } else {
            Complex64::new((1.0 - (-2.0f64 * 2.0).exp()) / 2.0, 0.0)
        };
        println!(
            "lambda={lambda}: finite={fin:.6} limit={lim:.6} closed={closed:.6} rel={:.4} [{:?}]",
            (fin - closed).norm() / closed.norm(),
            t0.elapsed()
        );
        let adv = slice_integral(&v, &w, &one, 0.0, Pairing::AlphaDv, Some(&alpha)).unwrap();
        let adv_lim = geodesic_limit(&v, &w, &one, 0.0, Pairing::AlphaDv, Some(&alpha)).unwrap();
        let adw = slice_integral(&v, &w, &one, 0.0, Pairing::AlphaDw, Some(&alpha)).unwrap();
        let adw_lim = geodesic_limit(&v, &w, &one, 0.0, Pairing::AlphaDw, Some(&alpha)).unwrap();
        println!("  alpha_dv: finite={adv:.6} limit={adv_lim:.6}");
        println!("  alpha_dw: finite={adw:.6} limit={adw_lim:.6}");
    }

    // Transversally crossing chords: mixed term of a Decaying beam on one
    // chord against a Growing beam on another, vs the matched diagonal.
    let cross_angle = 0.9f64;
    let geo2 = integrate_geodesic(
        &chart,
        &pt(&[cross_angle.cos(), cross_angle.sin()]),
        &pt(&[-cross_angle.cos(), -cross_angle.sin()]),
        &GeodesicOptions::default(),
    )
    .unwrap();
    for &h in &[0.02, 0.01, 5e-3] {
        let params = SemiclassicalParams::new(h, 0.0).unwrap();
        let opts = BeamOptions {
            delta_prime: 0.5,
            ..Default::default()
        };
        let v1 = assemble_quasimode(
            &chart, &geo, &a, &params, BeamKind::Decaying, (-1.0, 1.0), None, &opts,
        )
        .unwrap();
        let w1 = assemble_quasimode(
            &chart, &geo, &a, &params, BeamKind::Growing, (-1.0, 1.0), None, &opts,
        )
        .unwrap();
        let w2 = assemble_quasimode(
            &chart, &geo2, &a, &params, BeamKind::Growing, (-1.0, 1.0), None, &opts,
        )
        .unwrap();
        let diag = slice_integral(&v1, &w1, &one, 0.0, Pairing::Product, None).unwrap();
        // Mixed term by brute-force quadrature near the crossing point.
        let grid = GridSpec::new(&[-0.35, -0.35], &[0.35, 0.35], &[221, 221]);
        let split = slice_integral_grid(&v1, &w2, &one, 0.0, &grid).unwrap();
        println!(
            "h={h}: diag={:.5} mixed={:.5} |mixed|/|diag|={:.4}",
            diag,
            split.full,
            split.full.norm() / diag.norm()
        );
    }
}
