//! Scratch probe for the quasimode residual sweep (dev aid, not a test).

use num_complex::Complex64;

use geobeam_core::beam::{assemble_quasimode, residual_bound, BeamKind, BeamOptions};
use geobeam_core::beam::residual::ResidualOptions;
use geobeam_core::fields::{SampledField, SampledOneForm, SemiclassicalParams};
use geobeam_core::geometry::{integrate_geodesic, pt, GeodesicOptions, MetricChart, Pt};
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
    let agrid = GridSpec::new(&[-1.3, -1.3, -1.3], &[1.3, 1.3, 1.3], &[49, 49, 49]);
    // Lipschitz cone kink, compactly supported.
    let cone = |x: &Pt| ((0.5 - (x - pt(&[0.0, 0.2, 0.0])).norm()).max(0.0)) as f64;
    let a = SampledOneForm::from_fn(&prod, &agrid, |x| {
        let c = cone(x);
        vec![
            Complex64::new(c, 0.0),
            Complex64::new(0.7 * c, 0.0),
            Complex64::new(-0.4 * c, 0.0),
        ]
    });
    let q = SampledField::from_fn(&prod, &agrid, |x| {
        Complex64::new(if x.norm() < 0.8 { 0.8 } else { 0.0 }, 0.2 * cone(x))
    });

    for &h in &[0.1, 0.05, 0.025, 0.0125] {
        let t = std::time::Instant::now();
        let params = SemiclassicalParams::new(h, 0.0).unwrap();
        let opts = BeamOptions {
            delta_prime: 4.0,
            ..Default::default()
        };
        let beam = assemble_quasimode(
            &chart,
            &geo,
            &a,
            &params,
            BeamKind::Decaying,
            (-1.0, 1.0),
            None,
            &opts,
        )
        .unwrap();
        let rep = residual_bound(&beam, &a, &q, &ResidualOptions::default()).unwrap();
        println!(
            "h={h:<7} bound={:<12.5e} bound/h={:<10.4} smooth={:<10.3e} w1/h={:<10.3e} | eik={:.2e} tra={:.2e} 2nd={:.2e} 0th={:.2e} rough={:.2e} cut={:.2e}  [{:?}]",
            rep.bound,
            rep.bound / h,
            rep.smooth_norm,
            rep.rough_div_over_h,
            rep.eikonal,
            rep.transport,
            rep.second_order,
            rep.zeroth_order,
            rep.rough_l2,
            rep.cutoff,
            t.elapsed()
        );
    }
}
