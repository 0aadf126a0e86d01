//! Scratch probe: punctured-torus gauge with a non-exact trivial-holonomy
//! form vanishing near the hole.

use num_complex::Complex64;

use geobeam_core::fields::SampledOneForm;
use geobeam_core::geometry::{pt, MetricChart, Pt};
use geobeam_core::grid::GridSpec;
use geobeam_core::holonomy::{build_gauge, Curve, GaugeBuildOptions};

fn main() {
    let torus = MetricChart::flat_torus_sector([1.0, 1.0], [0.5, 0.5], 0.12);
    let grid = GridSpec::new_periodic(&[0.0, 0.0], &[1.0, 1.0], &[512, 512]);
    // A~ = 2 pi dx1 + d psi with psi = -2 pi x1 chi(d(x, hole)), chi a wide
    // C^4 polynomial step that is 1 near the hole; A~ vanishes identically
    // where chi = 1 and is closed everywhere.
    let kappa = 1.0;
    let chi = |d: f64| -> f64 {
        // 1 for d <= 0.14, 0 for d >= 0.49, C^4 smoothstep between.
        let s = ((d - 0.14) / 0.35).clamp(0.0, 1.0);
        1.0 - (126.0 * s.powi(5) - 420.0 * s.powi(6) + 540.0 * s.powi(7)
            - 315.0 * s.powi(8)
            + 70.0 * s.powi(9))
    };
    let dchi = |d: f64| -> f64 {
        let h = 1e-6;
        (chi(d + h) - chi(d - h)) / (2.0 * h)
    };
    let hole = [0.5, 0.5];
    let dist = |x: &Pt| -> (f64, [f64; 2]) {
        // Torus distance to the hole center with gradient (single branch:
        // the cutoff support stays well inside one period).
        let dx = x[0] - hole[0];
        let dy = x[1] - hole[1];
        let d = (dx * dx + dy * dy).sqrt().max(1e-12);
        (d, [dx / d, dy / d])
    };
    let tau = std::f64::consts::TAU;
    let _ = dchi;
    // psi = 2 pi kappa x1 chi(d); A~ = 2 pi kappa dx1 - D psi with the
    // grid's own stencils, so the discrete curl vanishes identically.
    let psi: Vec<Complex64> = (0..grid.len())
        .map(|i| {
            let x = pt(&grid.node(i));
            let (d, _) = dist(&x);
            Complex64::new(tau * kappa * (x[0] - 0.5) * chi(d), 0.0)
        })
        .collect();
    let a = geobeam_core::holonomy::closed_form_from_potential(
        &torus,
        &grid,
        [tau * kappa, 0.0],
        &psi,
    )
    .unwrap();
    // Loops: the two torus cycles (offset to avoid the hole) and the hole
    // circle.
    let loops = vec![
        Curve::from_fn_wrapped(|t| pt(&[t / tau, 0.02]), 0.0, tau, 4096, true, &[1.0, 1.0])
            .unwrap(),
        Curve::from_fn_wrapped(|t| pt(&[0.02, t / tau]), 0.0, tau, 4096, true, &[1.0, 1.0])
            .unwrap(),
        Curve::circle([0.5, 0.5], 0.135, 1.0, 4096),
    ];
    let opts = GaugeBuildOptions {
        certificate_margin: 0.0,
        refine_iters: 4,
        cg: geobeam_core::raytransform::GaugeOptions {
            cg_tol: 1e-12,
            cg_max_iter: 1500,
        },
        ..Default::default()
    };
    let t0 = std::time::Instant::now();
    match build_gauge(&a, &loops, &pt(&[0.5 + 0.121, 0.5]), &opts) {
        Ok(res) => println!(
            "certificate={:.3e} tree_disc={:.3e} boundary={:.3e} min|F|={:.4} [{:?}]",
            res.certificate_sup,
            res.tree_discrepancy,
            res.boundary_defect,
            res.min_modulus,
            t0.elapsed()
        ),
        Err(e) => println!("error: {e}"),
    }
}
