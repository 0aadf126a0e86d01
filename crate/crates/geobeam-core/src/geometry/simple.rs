//! Simplicity verification for 2-dimensional transversal charts: strict
//! boundary convexity via the second fundamental form and absence of
//! conjugate points via Jacobi fields along a boundary fan.

use serde::Serialize;

use crate::error::{CoreError, Result};
use crate::par::ExecMode;

use super::chart::MetricChart;
use super::geodesic::{boundary_fan, GeodesicOptions, GeodesicPath};

#[derive(Debug, Clone, Serialize)]
pub struct SimplicityReport {
    pub convex_boundary: bool,
    /// Minimum of the second fundamental form over the boundary samples.
    pub min_second_fundamental: f64,
    pub no_conjugate_points: bool,
    /// Minimum of the Jacobi determinant over all fan geodesics, after the
    /// initial zero has cleared.
    pub min_jacobi: f64,
    /// `None` means unknown; reported true only when both prior checks pass
    /// (derived, not independently verified).
    pub diffeomorphic_exp: Option<bool>,
}

#[derive(Debug, Clone, Copy)]
pub struct SimplicityOptions {
    pub boundary_samples: usize,
    pub fan_points: usize,
    pub fan_dirs: usize,
    /// Convexity demands II > this at every sample.
    pub convexity_tol: f64,
    pub geodesic: GeodesicOptions,
}

impl Default for SimplicityOptions {
    fn default() -> Self {
        Self {
            boundary_samples: 64,
            fan_points: 8,
            fan_dirs: 7,
            convexity_tol: 1e-6,
            geodesic: GeodesicOptions::default(),
        }
    }
}

/// Second fundamental form of the boundary w.r.t. the inward normal at the
/// boundary point `curve(theta)`; positive for strictly convex boundaries.
fn second_fundamental(chart: &MetricChart, theta: f64, dtheta: f64) -> Result<f64> {
    let x = chart.boundary_point(theta)?;
    let xp = chart.boundary_point(theta + dtheta)?;
    let xm = chart.boundary_point(theta - dtheta)?;
    let dx = (xp - xm) / (2.0 * dtheta);
    let speed = chart.norm(&x, &dx);
    if speed < 1e-12 {
        return Err(CoreError::Geometry("degenerate boundary tangent".into()));
    }
    let t_unit = dx / speed;
    // dT/ds via central differences of the unit tangent field.
    let tp = {
        let d = (chart.boundary_point(theta + 2.0 * dtheta)? - x) / (2.0 * dtheta);
        d / chart.norm(&xp, &d)
    };
    let tm = {
        let d = (x - chart.boundary_point(theta - 2.0 * dtheta)?) / (2.0 * dtheta);
        d / chart.norm(&xm, &d)
    };
    let dt_ds = (tp - tm) / (2.0 * dtheta * speed);
    let gamma = chart.christoffel(&x)?;
    let mut cov = dt_ds;
    for i in 0..chart.dim {
        cov[i] += (gamma[i] * t_unit).dot(&t_unit);
    }
    let nu_in = -chart.outward_normal(&x)?;
    Ok(chart.inner(&x, &cov, &nu_in))
}

/// Scalar Jacobi equation j'' + K(gamma(t)) j = 0 with j(0) = 0, j'(0) = 1
/// along a stored geodesic; returns the minimum of j after the initial zero.
fn min_jacobi_along(chart: &MetricChart, path: &GeodesicPath) -> Result<f64> {
    let n = path.samples.len();
    if n < 3 {
        return Ok(1.0);
    }
    let curv: Vec<f64> = {
        let mut k = Vec::with_capacity(n);
        for s in &path.samples {
            k.push(chart.gauss_curvature(&s.x)?);
        }
        k
    };
    let mut j = 0.0f64;
    let mut dj = 1.0f64;
    let mut min_j = f64::INFINITY;
    for i in 0..n - 1 {
        let h = path.samples[i + 1].t - path.samples[i].t;
        let k0 = curv[i];
        let k1 = curv[i + 1];
        let km = 0.5 * (k0 + k1);
        // RK4 for j'' = -K j with K interpolated on the step.
        let f = |k: f64, j: f64| -k * j;
        let (j1, d1) = (dj, f(k0, j));
        let (j2, d2) = (dj + 0.5 * h * d1, f(km, j + 0.5 * h * j1));
        let (j3, d3) = (dj + 0.5 * h * d2, f(km, j + 0.5 * h * j2));
        let (j4, d4) = (dj + h * d3, f(k1, j + h * j3));
        j += h / 6.0 * (j1 + 2.0 * j2 + 2.0 * j3 + j4);
        dj += h / 6.0 * (d1 + 2.0 * d2 + 2.0 * d3 + d4);
        // Skip the seeded zero at t = 0.
        if path.samples[i + 1].t > 10.0 * h {
            min_j = min_j.min(j);
        }
    }
    Ok(min_j)
}

pub fn check_simple(
    chart: &MetricChart,
    opts: &SimplicityOptions,
    mode: ExecMode,
) -> Result<SimplicityReport> {
    if chart.dim != 2 {
        return Err(CoreError::Unsupported(
            "simplicity check is for 2-dimensional transversal charts".into(),
        ));
    }
    if !chart.has_boundary_curve() {
        return Err(CoreError::Geometry(
            "simplicity check needs a parametrized boundary".into(),
        ));
    }
    let dtheta = std::f64::consts::TAU / (opts.boundary_samples as f64 * 8.0);
    let mut min_ii = f64::INFINITY;
    for i in 0..opts.boundary_samples {
        let theta = std::f64::consts::TAU * i as f64 / opts.boundary_samples as f64;
        min_ii = min_ii.min(second_fundamental(chart, theta, dtheta)?);
    }
    let convex = min_ii > opts.convexity_tol;

    let fan = boundary_fan(chart, opts.fan_points, opts.fan_dirs, &opts.geodesic, mode);
    let (no_conj, min_j) = match fan {
        Ok(fan) => {
            let mut min_j = f64::INFINITY;
            let mut trapped = false;
            for p in &fan {
                if !p.exit_time.is_finite() {
                    trapped = true;
                    continue;
                }
                min_j = min_j.min(min_jacobi_along(chart, p)?);
            }
            (!trapped && min_j > 0.0, min_j)
        }
        Err(_) => (false, f64::NAN),
    };

    let diffeo = if convex && no_conj { Some(true) } else { None };
    Ok(SimplicityReport {
        convex_boundary: convex,
        min_second_fundamental: min_ii,
        no_conjugate_points: no_conj,
        min_jacobi: min_j,
        diffeomorphic_exp: diffeo,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn flat_disk_is_simple() {
        let chart = MetricChart::euclidean_disk(1.0);
        let r = check_simple(&chart, &SimplicityOptions::default(), ExecMode::Sequential)
            .unwrap();
        assert!(r.convex_boundary);
        // Unit circle w.r.t. the inward normal has curvature 1.
        assert_relative_eq!(r.min_second_fundamental, 1.0, epsilon = 1e-4);
        assert!(r.no_conjugate_points);
        assert_eq!(r.diffeomorphic_exp, Some(true));
    }

    #[test]
    fn strict_cap_is_simple() {
        let chart = MetricChart::spherical_cap(0.5);
        let opts = SimplicityOptions {
            geodesic: GeodesicOptions {
                step: 1e-3,
                ..Default::default()
            },
            ..Default::default()
        };
        let r = check_simple(&chart, &opts, ExecMode::Sequential).unwrap();
        assert!(r.convex_boundary, "min II = {}", r.min_second_fundamental);
        assert!(r.no_conjugate_points, "min j = {}", r.min_jacobi);
        assert_eq!(r.diffeomorphic_exp, Some(true));
    }

    #[test]
    fn hemisphere_fails_convexity() {
        let chart = MetricChart::spherical_cap(0.0);
        let opts = SimplicityOptions {
            geodesic: GeodesicOptions {
                step: 1e-3,
                ..Default::default()
            },
            ..Default::default()
        };
        let r = check_simple(&chart, &opts, ExecMode::Sequential).unwrap();
        assert!(!r.convex_boundary, "min II = {}", r.min_second_fundamental);
        assert!(r.min_second_fundamental.abs() < 1e-3);
        assert_eq!(r.diffeomorphic_exp, None);
    }

    #[test]
    fn cap_family_simplicity_flips_once() {
        let opts = SimplicityOptions {
            boundary_samples: 32,
            fan_points: 4,
            fan_dirs: 5,
            geodesic: GeodesicOptions {
                step: 2e-3,
                ..Default::default()
            },
            ..Default::default()
        };
        let mut flags = Vec::new();
        for alpha0 in [0.6, 0.4, 0.2, 0.08, 0.0] {
            let chart = MetricChart::spherical_cap(alpha0);
            let r = check_simple(&chart, &opts, ExecMode::Sequential).unwrap();
            flags.push(r.convex_boundary && r.no_conjugate_points);
        }
        let flips = flags.windows(2).filter(|w| w[0] != w[1]).count();
        assert_eq!(flips, 1, "flags = {flags:?}");
        assert!(flags[0]);
        assert!(!flags[flags.len() - 1]);
    }
}
