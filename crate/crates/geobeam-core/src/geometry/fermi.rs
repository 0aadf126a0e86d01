//! Fermi coordinates along a transversal geodesic: a tubular chart (t, y) in
//! which the metric is Euclidean to second order on the axis.

use nalgebra::Matrix2;

use crate::error::{CoreError, Result};
use crate::grid::GridSpec;

use super::chart::{MetricChart, Pt};
use super::geodesic::{GeodesicOptions, GeodesicPath};

#[derive(Debug, Clone)]
pub struct FermiFrame {
    pub chart: MetricChart,
    pub half_width: f64,
    pub t_lo: f64,
    pub t_hi: f64,
    grid: GridSpec,
    /// Chart points of the tube nodes.
    points: Vec<Pt>,
    /// Tube tangent columns (dx/dt, dx/dy) per node.
    jac: Vec<(Pt, Pt)>,
    /// Frame metric (2x2) per node.
    gframe: Vec<Matrix2<f64>>,
    /// Exact straight-tube data for flat charts.
    flat_frame: Option<(Pt, Pt, Pt)>,
}

impl FermiFrame {
    pub fn t_range(&self) -> (f64, f64) {
        (self.t_lo, self.t_hi)
    }

    /// Chart point of the tube coordinates (t, y).
    pub fn chart_map(&self, t: f64, y: f64) -> Pt {
        if let Some((x0, vt, vy)) = &self.flat_frame {
            return x0 + vt * t + vy * y;
        }
        let mut p = Pt::zeros();
        for k in 0..self.chart.dim {
            p[k] = self
                .grid
                .interp_real(&self.comp(k), &[t, y]);
        }
        p
    }

    fn comp(&self, k: usize) -> Vec<f64> {
        self.points.iter().map(|p| p[k]).collect()
    }

    /// Frame metric g0 expressed in (t, y) coordinates.
    pub fn metric_in_frame(&self, t: f64, y: f64) -> Matrix2<f64> {
        if self.flat_frame.is_some() {
            return Matrix2::identity();
        }
        let mut m = Matrix2::zeros();
        for a in 0..2 {
            for b in 0..2 {
                let vals: Vec<f64> = self.gframe.iter().map(|g| g[(a, b)]).collect();
                m[(a, b)] = self.grid.interp_real(&vals, &[t, y]);
            }
        }
        m
    }

    pub fn sqrt_det_frame(&self, t: f64, y: f64) -> f64 {
        self.metric_in_frame(t, y).determinant().max(0.0).sqrt()
    }

    /// Tube coordinates of a chart point, Newton-refined; `None` when the
    /// point is outside the tube.
    pub fn inverse_map(&self, p: &Pt) -> Option<(f64, f64)> {
        if let Some((x0, vt, vy)) = &self.flat_frame {
            let d = p - x0;
            let (t, y) = match &self.chart.periodic_lengths {
                None => (d.dot(vt), d.dot(vy)),
                Some(lens) => {
                    // Scan wrap offsets for a representative inside the tube.
                    let mut best: Option<(f64, f64)> = None;
                    for k0 in -2i64..=2 {
                        for k1 in -2i64..=2 {
                            let mut dd = d;
                            dd[0] += k0 as f64 * lens[0];
                            dd[1] += k1 as f64 * lens[1];
                            let t = dd.dot(vt);
                            let y = dd.dot(vy);
                            if t >= self.t_lo - 1e-9
                                && t <= self.t_hi + 1e-9
                                && y.abs() <= self.half_width + 1e-9
                            {
                                best = Some((t, y));
                            }
                        }
                    }
                    best?
                }
            };
            if t < self.t_lo - 1e-9 || t > self.t_hi + 1e-9 || y.abs() > self.half_width + 1e-9
            {
                return None;
            }
            return Some((t, y));
        }
        // Initial guess: nearest axis sample.
        let nt = self.grid.shape[0];
        let ny = self.grid.shape[1];
        let mid = ny / 2;
        let mut best = (0usize, f64::INFINITY);
        for i in 0..nt {
            let ax = self.points[i * ny + mid];
            let d = (ax - p).norm();
            if d < best.1 {
                best = (i, d);
            }
        }
        if best.1 > self.half_width * 2.0 {
            return None;
        }
        let mut t = self.grid.axis_coord(0, best.0);
        let mut y = 0.0;
        for _ in 0..30 {
            let x = self.chart_map(t, y);
            let r = x - p;
            if r.norm() < 1e-12 {
                break;
            }
            let (jt, jy) = self.jac_at(t, y);
            let a = Matrix2::new(jt[0], jy[0], jt[1], jy[1]);
            let rhs = nalgebra::Vector2::new(r[0], r[1]);
            let upd = a.try_inverse()? * rhs;
            t -= upd[0];
            y -= upd[1];
            t = t.clamp(self.t_lo, self.t_hi);
            y = y.clamp(-self.half_width, self.half_width);
        }
        let err = (self.chart_map(t, y) - p).norm();
        if err > 1e-8 || y.abs() > self.half_width + 1e-9 {
            return None;
        }
        Some((t, y))
    }

    /// All tube coordinates mapping to a chart point; a single candidate
    /// except on periodic charts, where each wrap branch inside the tube is
    /// returned (self-intersecting geodesics see several).
    pub fn inverse_all(&self, p: &Pt) -> Vec<(f64, f64)> {
        if let (Some((x0, vt, vy)), Some(lens)) =
            (&self.flat_frame, &self.chart.periodic_lengths)
        {
            let d = p - x0;
            let mut out = Vec::new();
            for k0 in -3i64..=3 {
                for k1 in -3i64..=3 {
                    let mut dd = d;
                    dd[0] += k0 as f64 * lens[0];
                    dd[1] += k1 as f64 * lens[1];
                    let t = dd.dot(vt);
                    let y = dd.dot(vy);
                    if t >= self.t_lo - 1e-9
                        && t <= self.t_hi + 1e-9
                        && y.abs() <= self.half_width + 1e-9
                    {
                        out.push((t, y));
                    }
                }
            }
            out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            return out;
        }
        self.inverse_map(p).into_iter().collect()
    }

    /// Tube tangents (dx/dt, dx/dy) at (t, y).
    pub fn tangents(&self, t: f64, y: f64) -> (Pt, Pt) {
        if let Some((_, vt, vy)) = &self.flat_frame {
            return (*vt, *vy);
        }
        self.jac_at(t, y)
    }

    fn jac_at(&self, t: f64, y: f64) -> (Pt, Pt) {
        let mut jt = Pt::zeros();
        let mut jy = Pt::zeros();
        for k in 0..self.chart.dim {
            let vt: Vec<f64> = self.jac.iter().map(|(a, _)| a[k]).collect();
            let vy: Vec<f64> = self.jac.iter().map(|(_, b)| b[k]).collect();
            jt[k] = self.grid.interp_real(&vt, &[t, y]);
            jy[k] = self.grid.interp_real(&vy, &[t, y]);
        }
        (jt, jy)
    }

    /// Node coordinates of the stored tube grid (t-axis, y-axis); flat
    /// frames report a minimal 2x2 placeholder.
    pub fn node_axes(&self) -> (Vec<f64>, Vec<f64>) {
        let ts = (0..self.grid.shape[0])
            .map(|i| self.grid.axis_coord(0, i))
            .collect();
        let ys = (0..self.grid.shape[1])
            .map(|j| self.grid.axis_coord(1, j))
            .collect();
        (ts, ys)
    }

    /// Frame metric at a stored node, free of interpolation error.
    pub fn metric_at_node(&self, i: usize, j: usize) -> Matrix2<f64> {
        if self.flat_frame.is_some() {
            return Matrix2::identity();
        }
        self.gframe[i * self.grid.shape[1] + j]
    }

    pub fn is_flat(&self) -> bool {
        self.flat_frame.is_some()
    }

    /// Second y-derivative of the (t,t) frame-metric entry on the axis; this
    /// is the Riccati source assembled from the tube metric (it equals twice
    /// the negative Gauss curvature coefficient of the Fermi expansion).
    pub fn d2y_gtt_on_axis(&self, t: f64) -> f64 {
        if self.flat_frame.is_some() {
            return 0.0;
        }
        let hy = self.grid.steps[1];
        let g = |y: f64| self.metric_in_frame(t, y)[(0, 0)];
        (-g(2.0 * hy) - g(-2.0 * hy) + 16.0 * (g(hy) + g(-hy)) - 30.0 * g(0.0))
            / (12.0 * hy * hy)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FermiOptions {
    pub nt: usize,
    pub ny: usize,
    pub geodesic: GeodesicOptions,
}

impl Default for FermiOptions {
    fn default() -> Self {
        Self {
            nt: 201,
            ny: 33,
            geodesic: GeodesicOptions::default(),
        }
    }
}

/// Unit normal field along a 2D geodesic (automatically parallel).
fn unit_normal(chart: &MetricChart, x: &Pt, v: &Pt) -> Pt {
    let g = chart.metric(x);
    let sd = chart.sqrt_det(x);
    let v_cov = g * *v;
    let mut e = Pt::zeros();
    e[0] = v_cov[1] / sd;
    e[1] = -v_cov[0] / sd;
    e
}

/// Build Fermi coordinates of half-width `half_width` around a
/// non-tangential geodesic.
pub fn fermi_coordinates(
    chart: &MetricChart,
    geo: &GeodesicPath,
    half_width: f64,
    opts: &FermiOptions,
) -> Result<FermiFrame> {
    if chart.dim != 2 {
        return Err(CoreError::Unsupported(
            "Fermi frames are built on the 2-dimensional transversal".into(),
        ));
    }
    let t_lo = 0.0;
    let t_hi = geo.exit_time;
    if !t_hi.is_finite() {
        return Err(CoreError::Contract("trapped geodesics have no frame".into()));
    }
    if chart.flat {
        let s0 = &geo.samples[0];
        let e = unit_normal(chart, &s0.x, &s0.v);
        return Ok(FermiFrame {
            chart: chart.clone(),
            half_width,
            t_lo,
            t_hi,
            grid: GridSpec::new(&[t_lo, -half_width], &[t_hi, half_width], &[2, 2]),
            points: Vec::new(),
            jac: Vec::new(),
            gframe: Vec::new(),
            flat_frame: Some((s0.x, s0.v, e)),
        });
    }

    let nt = opts.nt.max(5);
    let ny = if opts.ny % 2 == 1 { opts.ny } else { opts.ny + 1 }.max(5);
    let grid = GridSpec::new(&[t_lo, -half_width], &[t_hi, half_width], &[nt, ny]);
    let mut points = vec![Pt::zeros(); nt * ny];
    let mut dxdy = vec![Pt::zeros(); nt * ny];
    let ystep = grid.steps[1];
    let ht = grid.steps[0];
    let mid = ny / 2;

    // Re-integrate the axis so the stored samples are smooth in the frame
    // node index (interpolating the input path would leave piecewise-linear
    // kinks that pollute the t-derivatives below).
    let mut axis = Vec::with_capacity(nt);
    {
        let s0 = &geo.samples[0];
        let mut x = s0.x;
        let mut v = s0.v;
        axis.push((x, v));
        let sub = (ht / opts.geodesic.step).ceil().max(1.0) as usize;
        let h = ht / sub as f64;
        for _ in 1..nt {
            for _ in 0..sub {
                let (nx, nv) = rk4_normal(chart, &x, &v, h)?;
                x = nx;
                v = nv;
            }
            axis.push((x, v));
        }
    }

    for (i, (x0, v0)) in axis.iter().enumerate() {
        let e = unit_normal(chart, x0, v0);
        points[i * ny + mid] = *x0;
        dxdy[i * ny + mid] = e;
        // March the normal geodesic in both y directions.
        for dir in [1.0f64, -1.0] {
            let mut x = *x0;
            let mut v = e * dir;
            let sub = 8usize;
            let h = ystep / sub as f64;
            for j in 1..=mid {
                for _ in 0..sub {
                    let (nx, nv) = rk4_normal(chart, &x, &v, h)?;
                    x = nx;
                    v = nv;
                }
                let col = if dir > 0.0 { mid + j } else { mid - j };
                points[i * ny + col] = x;
                dxdy[i * ny + col] = v * dir;
            }
        }
    }

    // dx/dt by 4th-order differences across t-columns.
    let mut dxdt = vec![Pt::zeros(); nt * ny];
    for j in 0..ny {
        for i in 0..nt {
            let at = |ii: isize| points[(ii as usize) * ny + j];
            let ii = i as isize;
            dxdt[i * ny + j] = if (2..nt - 2).contains(&i) {
                (at(ii - 2) - at(ii - 1) * 8.0 + at(ii + 1) * 8.0 - at(ii + 2)) / (12.0 * ht)
            } else if i == 0 {
                (at(0) * -25.0 + at(1) * 48.0 - at(2) * 36.0 + at(3) * 16.0 - at(4) * 3.0)
                    / (12.0 * ht)
            } else if i == 1 {
                (at(0) * -3.0 - at(1) * 10.0 + at(2) * 18.0 - at(3) * 6.0 + at(4)) / (12.0 * ht)
            } else if i == nt - 2 {
                let m = (nt - 1) as isize;
                -(at(m) * -3.0 - at(m - 1) * 10.0 + at(m - 2) * 18.0 - at(m - 3) * 6.0
                    + at(m - 4))
                    / (12.0 * ht)
            } else {
                let m = (nt - 1) as isize;
                -(at(m) * -25.0 + at(m - 1) * 48.0 - at(m - 2) * 36.0 + at(m - 3) * 16.0
                    - at(m - 4) * 3.0)
                    / (12.0 * ht)
            };
        }
    }

    let mut gframe = vec![Matrix2::zeros(); nt * ny];
    let mut jac = vec![(Pt::zeros(), Pt::zeros()); nt * ny];
    for idx in 0..nt * ny {
        let x = points[idx];
        let g = chart.metric(&x);
        let jt = dxdt[idx];
        let jy = dxdy[idx];
        let m = Matrix2::new(
            (g * jt).dot(&jt),
            (g * jt).dot(&jy),
            (g * jy).dot(&jt),
            (g * jy).dot(&jy),
        );
        let eig = m.symmetric_eigenvalues();
        if eig.min() <= 0.0 {
            return Err(CoreError::Frame(format!(
                "tube width {half_width} too large: frame metric loses positive definiteness"
            )));
        }
        gframe[idx] = m;
        jac[idx] = (jt, jy);
    }

    Ok(FermiFrame {
        chart: chart.clone(),
        half_width,
        t_lo,
        t_hi,
        grid,
        points,
        jac,
        gframe,
        flat_frame: None,
    })
}

fn rk4_normal(chart: &MetricChart, x: &Pt, v: &Pt, h: f64) -> Result<(Pt, Pt)> {
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::chart::pt;
    use crate::geometry::geodesic::integrate_geodesic;
    use approx::assert_relative_eq;

    #[test]
    fn flat_frame_is_straight_tube() {
        let chart = MetricChart::euclidean_disk(1.0);
        let geo = integrate_geodesic(
            &chart,
            &pt(&[1.0, 0.0]),
            &pt(&[-1.0, 0.0]),
            &GeodesicOptions::default(),
        )
        .unwrap();
        let frame = fermi_coordinates(&chart, &geo, 0.3, &FermiOptions::default()).unwrap();
        // Diameter from (1,0) towards (-1,0); the normal is +e2.
        let p = frame.chart_map(0.5, 0.1);
        assert_relative_eq!(p[0], 0.5, epsilon = 1e-12);
        assert_relative_eq!(p[1], 0.1, epsilon = 1e-12);
        let m = frame.metric_in_frame(0.7, 0.2);
        assert_relative_eq!(m[(0, 0)], 1.0, epsilon = 1e-12);
        assert_relative_eq!(m[(1, 1)], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn perturbed_metric_fermi_property() {
        let chart =
            MetricChart::conformal_disk(1.0, |x: &Pt| 1.0 + 0.1 * (-x.norm_squared()).exp());
        let x0 = pt(&[chart.boundary_point(0.0).unwrap()[0], 0.0]);
        let dir = pt(&[-1.0, 0.0]);
        let v0 = dir / chart.norm(&x0, &dir);
        let geo = integrate_geodesic(
            &chart,
            &x0,
            &v0,
            &GeodesicOptions {
                step: 1e-3,
                ..Default::default()
            },
        )
        .unwrap();
        let frame = fermi_coordinates(
            &chart,
            &geo,
            0.2,
            &FermiOptions {
                nt: 101,
                ny: 41,
                ..Default::default()
            },
        )
        .unwrap();
        let hy = 0.4 / 40.0;
        for &t in &[0.2, 0.8, 1.4] {
            let m = frame.metric_in_frame(t, 0.0);
            assert_relative_eq!(m[(0, 0)], 1.0, epsilon = 1e-6);
            assert_relative_eq!(m[(1, 1)], 1.0, epsilon = 1e-6);
            assert!(m[(0, 1)].abs() < 1e-6);
            // First y-derivatives vanish on the axis within grid tolerance.
            let gp = frame.metric_in_frame(t, hy);
            let gm = frame.metric_in_frame(t, -hy);
            for a in 0..2 {
                for b in 0..2 {
                    let d = (gp[(a, b)] - gm[(a, b)]) / (2.0 * hy);
                    assert!(d.abs() < 5.0 * hy, "d_y g[{a}{b}] = {d}");
                }
            }
        }
    }

    #[test]
    fn inverse_roundtrip_on_tube() {
        let chart =
            MetricChart::conformal_disk(1.0, |x: &Pt| 1.0 + 0.1 * (-x.norm_squared()).exp());
        let x0 = chart.boundary_point(0.3).unwrap();
        let nu = chart.outward_normal(&x0).unwrap();
        let v0 = -nu;
        let geo = integrate_geodesic(
            &chart,
            &x0,
            &v0,
            &GeodesicOptions {
                step: 1e-3,
                ..Default::default()
            },
        )
        .unwrap();
        let frame = fermi_coordinates(
            &chart,
            &geo,
            0.15,
            &FermiOptions {
                nt: 161,
                ny: 33,
                ..Default::default()
            },
        )
        .unwrap();
        let mut worst: f64 = 0.0;
        let mut rng = 0x243f6a88u64;
        for _ in 0..100 {
            rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let r1 = ((rng >> 11) as f64) / (1u64 << 53) as f64;
            rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let r2 = ((rng >> 11) as f64) / (1u64 << 53) as f64;
            let t = 0.1 + r1 * (frame.t_hi - 0.2);
            let y = (r2 - 0.5) * 0.25;
            let p = frame.chart_map(t, y);
            let (ti, yi) = frame.inverse_map(&p).expect("point inside tube");
            let p2 = frame.chart_map(ti, yi);
            worst = worst.max((p2 - p).norm());
        }
        assert!(worst < 1e-8, "roundtrip error {worst}");
    }
}
