//! Polar normal coordinates (r, theta) around a center point of a simple
//! transversal chart: r is geodesic distance, and the metric takes the block
//! form diag(1, m(r, theta)).

use crate::error::{CoreError, Result};
use crate::grid::GridSpec;
use crate::par::ExecMode;

use super::chart::{MetricChart, Pt};
use super::geodesic::GeodesicOptions;
use super::simple::{check_simple, SimplicityOptions};

#[derive(Debug, Clone)]
pub struct PolarChart {
    pub chart: MetricChart,
    pub center: Pt,
    pub r_max: f64,
    grid: GridSpec,
    points: Vec<Pt>,
    /// Radial tangent dx/dr per node (unit-speed geodesic velocities).
    dr: Vec<Pt>,
    /// Angular tangent dx/dtheta per node.
    dth: Vec<Pt>,
    flat_center: Option<Pt>,
}

#[derive(Debug, Clone, Copy)]
pub struct PolarOptions {
    pub nr: usize,
    pub ntheta: usize,
    pub ode_step: f64,
    /// Skip the simplicity precondition check (caller already verified it).
    pub assume_simple: bool,
}

impl Default for PolarOptions {
    fn default() -> Self {
        Self {
            nr: 129,
            ntheta: 96,
            ode_step: 2e-3,
            assume_simple: false,
        }
    }
}

pub fn polar_normal_coords(
    chart: &MetricChart,
    center: &Pt,
    r_max: f64,
    opts: &PolarOptions,
) -> Result<PolarChart> {
    if chart.dim != 2 {
        return Err(CoreError::Unsupported(
            "polar normal coordinates need a 2-dimensional chart".into(),
        ));
    }
    if !opts.assume_simple && !chart.flat {
        let simp = check_simple(
            chart,
            &SimplicityOptions {
                boundary_samples: 32,
                fan_points: 4,
                fan_dirs: 3,
                geodesic: GeodesicOptions {
                    step: 5e-3,
                    ..Default::default()
                },
                ..Default::default()
            },
            ExecMode::Parallel,
        )?;
        if !(simp.convex_boundary && simp.no_conjugate_points) {
            return Err(CoreError::Unsupported(
                "polar normal coordinates require a simple chart".into(),
            ));
        }
    }
    if chart.flat {
        return Ok(PolarChart {
            chart: chart.clone(),
            center: *center,
            r_max,
            grid: GridSpec::new(&[0.0, 0.0], &[r_max, std::f64::consts::TAU], &[2, 2]),
            points: Vec::new(),
            dr: Vec::new(),
            dth: Vec::new(),
            flat_center: Some(*center),
        });
    }

    let nr = opts.nr.max(3);
    let nth = opts.ntheta.max(8);
    let mut grid = GridSpec::new_periodic(&[0.0, 0.0], &[1.0, std::f64::consts::TAU], &[nr, nth]);
    // Radial axis is not periodic; rebuild the spec by hand.
    grid.periodic[0] = false;
    grid.mins[0] = 0.0;
    grid.steps[0] = r_max / (nr - 1) as f64;

    let mut points = vec![Pt::zeros(); nr * nth];
    let mut dr = vec![Pt::zeros(); nr * nth];
    for j in 0..nth {
        let th = grid.axis_coord(1, j);
        let dir0 = super::chart::pt(&[th.cos(), th.sin()]);
        let v0 = dir0 / chart.norm(center, &dir0);
        let mut x = *center;
        let mut v = v0;
        points[j] = x;
        dr[j] = v;
        let sub = (grid.steps[0] / opts.ode_step).ceil().max(1.0) as usize;
        let h = grid.steps[0] / sub as f64;
        for i in 1..nr {
            for _ in 0..sub {
                let (nx, nv) = rk4(chart, &x, &v, h)?;
                x = nx;
                v = nv;
            }
            points[i * nth + j] = x;
            dr[i * nth + j] = v;
        }
    }
    // dx/dtheta by 4th-order periodic differences.
    let hth = grid.steps[1];
    let mut dth = vec![Pt::zeros(); nr * nth];
    for i in 0..nr {
        for j in 0..nth {
            let at = |o: isize| {
                let jj = (j as isize + o).rem_euclid(nth as isize) as usize;
                points[i * nth + jj]
            };
            dth[i * nth + j] =
                (at(-2) - at(-1) * 8.0 + at(1) * 8.0 - at(2)) / (12.0 * hth);
        }
    }
    Ok(PolarChart {
        chart: chart.clone(),
        center: *center,
        r_max,
        grid,
        points,
        dr,
        dth,
        flat_center: None,
    })
}

fn rk4(chart: &MetricChart, x: &Pt, v: &Pt, h: f64) -> Result<(Pt, Pt)> {
    let f = |x: &Pt, v: &Pt| -> Result<(Pt, Pt)> {
        let gamma = chart.christoffel(x)?;
        let mut acc = Pt::zeros();
        for i in 0..chart.dim {
            acc[i] = -(gamma[i] * *v).dot(v);
        }
        Ok((*v, acc))
    };
    let (k1x, k1v) = f(x, v)?;
    let (k2x, k2v) = f(&(x + k1x * (h / 2.0)), &(v + k1v * (h / 2.0)))?;
    let (k3x, k3v) = f(&(x + k2x * (h / 2.0)), &(v + k2v * (h / 2.0)))?;
    let (k4x, k4v) = f(&(x + k3x * h), &(v + k3v * h))?;
    Ok((
        x + (k1x + k2x * 2.0 + k3x * 2.0 + k4x) * (h / 6.0),
        v + (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (h / 6.0),
    ))
}

impl PolarChart {
    pub fn point(&self, r: f64, theta: f64) -> Pt {
        if let Some(c) = &self.flat_center {
            return super::chart::pt(&[c[0] + r * theta.cos(), c[1] + r * theta.sin()]);
        }
        let mut p = Pt::zeros();
        for k in 0..2 {
            let vals: Vec<f64> = self.points.iter().map(|q| q[k]).collect();
            p[k] = self.grid.interp_real(&vals, &[r, theta]);
        }
        p
    }

    /// Radial tangent dx/dr at (r, theta).
    pub fn radial_tangent(&self, r: f64, theta: f64) -> Pt {
        if self.flat_center.is_some() {
            return super::chart::pt(&[theta.cos(), theta.sin()]);
        }
        let mut p = Pt::zeros();
        for k in 0..2 {
            let vals: Vec<f64> = self.dr.iter().map(|q| q[k]).collect();
            p[k] = self.grid.interp_real(&vals, &[r, theta]);
        }
        p
    }

    /// Angular tangent dx/dtheta at (r, theta).
    pub fn angular_tangent(&self, r: f64, theta: f64) -> Pt {
        if self.flat_center.is_some() {
            return super::chart::pt(&[-r * theta.sin(), r * theta.cos()]);
        }
        let mut p = Pt::zeros();
        for k in 0..2 {
            let vals: Vec<f64> = self.dth.iter().map(|q| q[k]).collect();
            p[k] = self.grid.interp_real(&vals, &[r, theta]);
        }
        p
    }

    /// Angular metric block m(r, theta) = |dx/dtheta|_g^2.
    pub fn m_block(&self, r: f64, theta: f64) -> f64 {
        let x = self.point(r, theta);
        let a = self.angular_tangent(r, theta);
        self.chart.inner(&x, &a, &a)
    }

    /// Gauss-lemma entries (g_rr, g_rtheta) at (r, theta); should be (1, 0).
    pub fn radial_entries(&self, r: f64, theta: f64) -> (f64, f64) {
        let x = self.point(r, theta);
        let dr = self.radial_tangent(r, theta);
        let dth = self.angular_tangent(r, theta);
        (self.chart.inner(&x, &dr, &dr), self.chart.inner(&x, &dr, &dth))
    }

    /// Gauss-lemma entries at a stored node, free of interpolation error.
    pub fn radial_entries_at_node(&self, ir: usize, itheta: usize) -> (f64, f64) {
        if self.flat_center.is_some() {
            return (1.0, 0.0);
        }
        let nth = self.grid.shape[1];
        let idx = ir * nth + itheta;
        let x = self.points[idx];
        let dr = self.dr[idx];
        let dth = self.dth[idx];
        (self.chart.inner(&x, &dr, &dr), self.chart.inner(&x, &dr, &dth))
    }

    pub fn node_counts(&self) -> (usize, usize) {
        (self.grid.shape[0], self.grid.shape[1])
    }

    /// Polar coordinates of a chart point (Newton for curved charts).
    pub fn inverse(&self, x: &Pt) -> Result<(f64, f64)> {
        if let Some(c) = &self.flat_center {
            let d = x - c;
            return Ok((d.norm(), d[1].atan2(d[0]).rem_euclid(std::f64::consts::TAU)));
        }
        // Nearest stored node as the seed.
        let nth = self.grid.shape[1];
        let mut best = (0usize, f64::INFINITY);
        for (idx, q) in self.points.iter().enumerate() {
            let d = (q - x).norm();
            if d < best.1 {
                best = (idx, d);
            }
        }
        let mut r = self.grid.axis_coord(0, best.0 / nth);
        let mut th = self.grid.axis_coord(1, best.0 % nth);
        for _ in 0..40 {
            let p = self.point(r, th);
            let res = p - x;
            if res.norm() < 1e-12 {
                break;
            }
            let jr = self.radial_tangent(r, th);
            let jt = self.angular_tangent(r, th);
            let a = nalgebra::Matrix2::new(jr[0], jt[0], jr[1], jt[1]);
            let inv = a.try_inverse().ok_or_else(|| {
                CoreError::Conditioning("degenerate polar Jacobian".into())
            })?;
            let upd = inv * nalgebra::Vector2::new(res[0], res[1]);
            r = (r - upd[0]).clamp(0.0, self.r_max);
            th -= upd[1];
        }
        let err = (self.point(r, th) - x).norm();
        if err > 1e-6 {
            return Err(CoreError::Domain(format!(
                "polar inversion did not converge (residual {err:.2e})"
            )));
        }
        Ok((r, th.rem_euclid(std::f64::consts::TAU)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::chart::pt;
    use approx::assert_relative_eq;

    #[test]
    fn flat_disk_center_is_standard_polar() {
        let chart = MetricChart::euclidean_disk(1.0);
        let pc = polar_normal_coords(&chart, &pt(&[0.0, 0.0]), 1.0, &PolarOptions::default())
            .unwrap();
        let p = pc.point(0.5, 1.2);
        assert_relative_eq!(p[0], 0.5 * 1.2f64.cos(), epsilon = 1e-12);
        assert_relative_eq!(p[1], 0.5 * 1.2f64.sin(), epsilon = 1e-12);
        assert_relative_eq!(pc.m_block(0.5, 1.2), 0.25, epsilon = 1e-12);
    }

    #[test]
    fn flat_disk_boundary_pole_distance() {
        let chart = MetricChart::euclidean_disk(1.0);
        let omega = pt(&[1.0, 0.0]);
        let pc =
            polar_normal_coords(&chart, &omega, 2.0, &PolarOptions::default()).unwrap();
        for q in [[0.3, 0.2], [-0.5, 0.1], [0.0, -0.7]] {
            let (r, _) = pc.inverse(&pt(&q)).unwrap();
            let d = ((q[0] - 1.0).powi(2) + q[1].powi(2)).sqrt();
            assert_relative_eq!(r, d, epsilon = 1e-8);
        }
    }

    #[test]
    fn cap_gauss_lemma() {
        let chart = MetricChart::spherical_cap(0.5);
        let pc = polar_normal_coords(
            &chart,
            &pt(&[0.0, 0.0]),
            0.9,
            &PolarOptions {
                nr: 65,
                ntheta: 96,
                ode_step: 1e-3,
                assume_simple: true,
            },
        )
        .unwrap();
        let (nr, nth) = pc.node_counts();
        for ir in (4..nr).step_by(12) {
            for it in (0..nth).step_by(7) {
                let (grr, grt) = pc.radial_entries_at_node(ir, it);
                assert_relative_eq!(grr, 1.0, epsilon = 1e-6);
                assert!(grt.abs() < 1e-4, "g_rtheta = {grt}");
            }
        }
    }
}
