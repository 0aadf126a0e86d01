//! Scratch probe for the WKB residual sweep.

use num_complex::Complex64;

use geobeam_core::cgo::{build_wkb, wkb_residual, CylinderGeometry, Seed, WkbOptions};
use geobeam_core::fields::{SampledField, SampledOneForm, SemiclassicalParams};
use geobeam_core::geometry::{pt, MetricChart, Pt};
use geobeam_core::grid::GridSpec;
use geobeam_core::ExecMode;

fn main() {
    // D = unit disk, pole on its boundary; footprint = small disk inside.
    let disk = MetricChart::euclidean_disk(1.0);
    let footprint = MetricChart::builder(2, "footprint")
        .metric(|_| geobeam_core::geometry::Mat3::identity())
        .flat()
        .boundary(|x: &Pt| ((x[0] + 0.25).powi(2) + x[1] * x[1]).sqrt() - 0.5)
        .boundary_curve(|t: f64| pt(&[-0.25 + 0.5 * t.cos(), 0.5 * t.sin()]))
        .valid_box(&[-2.0, -2.0], &[2.0, 2.0])
        .build();
    let omega = pt(&[1.0, 0.0]);
    // r-range: distances from omega to the footprint: [0.75, 1.75].
    let geom = CylinderGeometry {
        omega,
        x1_range: (-0.8, 0.8),
        r_range: (0.55, 1.95),
        theta_range: (
            std::f64::consts::PI - 0.95,
            std::f64::consts::PI + 0.95,
        ),
    };
    let prod = MetricChart::product(&footprint, -0.8, 0.8);
    let agrid = GridSpec::new(&[-1.0, -0.95, -0.7], &[1.0, 0.45, 0.7], &[49, 41, 41]);
    // Discontinuous box potential (L^inf) to exercise the tau rates.
    let abox = |x: &Pt| {
        if x[0].abs() < 0.4 && (x[1] + 0.25).abs() < 0.25 && x[2].abs() < 0.25 {
            1.0
        } else {
            0.0
        }
    };
    let a = SampledOneForm::from_fn(&prod, &agrid, |x| {
        let v = abox(x);
        vec![
            Complex64::new(v, 0.0),
            Complex64::new(0.6 * v, 0.0),
            Complex64::new(-0.3 * v, 0.0),
        ]
    });
    let q = SampledField::from_fn(&prod, &agrid, |x| Complex64::new(0.5 * abox(x), 0.1));

    for &h in &[0.1, 0.05, 0.025, 0.0125] {
        let t0 = std::time::Instant::now();
        let params = SemiclassicalParams::new(h, 0.0).unwrap();
        let sol = build_wkb(
            &footprint,
            &disk,
            &geom,
            &a,
            &params,
            Seed::One,
            &|_| 1.0,
            &WkbOptions::default(),
        )
        .unwrap();
        let rep = wkb_residual(&sol, &a, &q, ExecMode::Parallel).unwrap();
        println!(
            "h={h:<7} bound={:<12.5e} bound/h={:<9.4} trans_res={:<9.2e} | lap={:.2e} a_da={:.2e} rough={:.2e} dstar={:.2e} 0th={:.2e} w1/h={:.2e} [{:?}]",
            rep.bound,
            rep.bound / h,
            sol.transport_residual,
            rep.laplacian,
            rep.a_da,
            rep.rough_phase,
            rep.dstar_smooth,
            rep.zeroth,
            rep.rough_div_over_h,
            t0.elapsed()
        );
    }
}
