//! Scratch probe for the Carleman family ratios.

use geobeam_core::carleman::{
    adversarial_family, bump_family, verify_carleman, CarlemanKind, CarlemanWeight,
};
use geobeam_core::fields::SemiclassicalParams;
use geobeam_core::geometry::MetricChart;
use geobeam_core::grid::GridSpec;
use geobeam_core::ExecMode;

fn main() {
    let chart = MetricChart::flat_slab(&[-1.0, -1.0], &[1.0, 1.0]);
    let grid = GridSpec::new(&[-1.0, -1.0], &[1.0, 1.0], &[192, 192]);
    let eps = 0.3;
    for &h in &[0.1, 0.05, 0.025] {
        let params = SemiclassicalParams::new(h, 0.0).unwrap();
        let wc = CarlemanWeight::convexified(h, eps, 1.0).unwrap();
        let fam = bump_family(&chart, &grid, h, 20, 42);
        let rep = verify_carleman(
            &chart, &fam, &params, wc, CarlemanKind::LaplaceS0, None, None,
            ExecMode::Parallel, "bump",
        )
        .unwrap();
        let adv = adversarial_family(&chart, &grid, h, 12, 999);
        let rep_adv_convex = verify_carleman(
            &chart, &adv, &params, wc, CarlemanKind::LaplaceS0, None, None,
            ExecMode::Parallel, "adv-convex",
        )
        .unwrap();
        let wl = CarlemanWeight::linear(h);
        let rep_adv = verify_carleman(
            &chart, &adv, &params, wl, CarlemanKind::LaplaceS0, None, None,
            ExecMode::Parallel, "adv-linear",
        )
        .unwrap();
        // Ratio normalization for the linear weight keeps the same
        // (h/sqrt(eps)) left side for comparability.
        let scale = eps.sqrt();
        println!(
            "h={h:<6} bump_min={:<8.4} adv_convex_min={:<8.4} adv_linear_min={:<8.4} (x 1/sqrt(eps): {:.4}) drop={:.1}x",
            rep.min_ratio,
            rep_adv_convex.min_ratio,
            rep_adv.min_ratio,
            rep_adv.min_ratio * scale,
            rep.min_ratio / (rep_adv.min_ratio * scale),
        );
    }
}
