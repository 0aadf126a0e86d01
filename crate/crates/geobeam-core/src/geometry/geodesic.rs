//! Geodesic flow: fixed-step RK4 integration of the geodesic ODE with
//! boundary exit located by bisection, and boundary fans.

use serde::Serialize;

use crate::error::{CoreError, Result};
use crate::par::{map_slice, ExecMode};

use super::chart::{MetricChart, Pt};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EntryClassification {
    NonTangential,
    Tangential,
    Trapped,
}

/// One sample of a unit-speed geodesic: arclength, point, velocity.
#[derive(Debug, Clone, Copy)]
pub struct GeodesicSample {
    pub t: f64,
    pub x: Pt,
    pub v: Pt,
}

#[derive(Debug, Clone)]
pub struct GeodesicPath {
    pub samples: Vec<GeodesicSample>,
    /// First boundary exit time; `f64::INFINITY` is the trapped sentinel.
    pub exit_time: f64,
    pub classification: EntryClassification,
    /// Entry tag (x, xi) on the incoming boundary.
    pub entry: (Pt, Pt),
}

impl GeodesicPath {
    pub fn length(&self) -> f64 {
        self.exit_time
    }

    /// Point at arclength `t` by linear interpolation between samples.
    pub fn point_at(&self, t: f64) -> Pt {
        self.sample_at(t).x
    }

    pub fn velocity_at(&self, t: f64) -> Pt {
        self.sample_at(t).v
    }

    fn sample_at(&self, t: f64) -> GeodesicSample {
        let s = &self.samples;
        if t <= s[0].t {
            return s[0];
        }
        if t >= s[s.len() - 1].t {
            return s[s.len() - 1];
        }
        let step = s[1].t - s[0].t;
        let mut i = ((t - s[0].t) / step) as usize;
        i = i.min(s.len() - 2);
        while s[i + 1].t < t && i + 2 < s.len() {
            i += 1;
        }
        let (a, b) = (&s[i], &s[i + 1]);
        let f = (t - a.t) / (b.t - a.t);
        GeodesicSample {
            t,
            x: a.x + (b.x - a.x) * f,
            v: a.v + (b.v - a.v) * f,
        }
    }

    /// Max unit-speed drift over the stored samples.
    pub fn speed_drift(&self, chart: &MetricChart) -> f64 {
        self.samples
            .iter()
            .map(|s| (chart.norm(&s.x, &s.v) - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GeodesicOptions {
    pub step: f64,
    /// Geodesics longer than this are classified trapped.
    pub max_length: f64,
    /// |<v, nu>| must exceed this for a non-tangential classification.
    pub tangency_threshold: f64,
    pub bisection_tol: f64,
}

impl Default for GeodesicOptions {
    fn default() -> Self {
        Self {
            step: 2e-3,
            max_length: 50.0,
            tangency_threshold: 0.05,
            bisection_tol: 1e-10,
        }
    }
}

fn rhs(chart: &MetricChart, x: &Pt, v: &Pt) -> Result<(Pt, Pt)> {
    let gamma = chart.christoffel(x)?;
    let mut acc = Pt::zeros();
    for i in 0..chart.dim {
        acc[i] = -(gamma[i] * *v).dot(v);
    }
    Ok((*v, acc))
}

fn rk4_step(chart: &MetricChart, x: &Pt, v: &Pt, h: f64) -> Result<(Pt, Pt)> {
    let (k1x, k1v) = rhs(chart, x, v)?;
    let (k2x, k2v) = rhs(chart, &(x + k1x * (h / 2.0)), &(v + k1v * (h / 2.0)))?;
    let (k3x, k3v) = rhs(chart, &(x + k2x * (h / 2.0)), &(v + k2v * (h / 2.0)))?;
    let (k4x, k4v) = rhs(chart, &(x + k3x * h), &(v + k3v * h))?;
    let nx = x + (k1x + k2x * 2.0 + k3x * 2.0 + k4x) * (h / 6.0);
    let nv = v + (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (h / 6.0);
    if !nx.iter().all(|c| c.is_finite()) || !nv.iter().all(|c| c.is_finite()) {
        return Err(CoreError::Integration("geodesic state blew up".into()));
    }
    Ok((nx, nv))
}

/// Integrate the geodesic from a boundary point with inward unit velocity.
pub fn integrate_geodesic(
    chart: &MetricChart,
    x0: &Pt,
    v0: &Pt,
    opts: &GeodesicOptions,
) -> Result<GeodesicPath> {
    let speed = chart.norm(x0, v0);
    if (speed - 1.0).abs() > 1e-8 {
        return Err(CoreError::Contract(format!(
            "initial velocity must be unit speed (|v|_g = {speed})"
        )));
    }
    let nu = chart.outward_normal(x0)?;
    let vn = chart.inner(x0, v0, &nu);
    if vn >= 0.0 {
        return Err(CoreError::Contract(
            "initial velocity must point inward".into(),
        ));
    }
    let entry_tangential = vn.abs() <= opts.tangency_threshold;

    let mut samples = vec![GeodesicSample {
        t: 0.0,
        x: *x0,
        v: *v0,
    }];
    let mut x = *x0;
    let mut v = *v0;
    let mut t = 0.0;
    // Push off the boundary before watching for exits.
    let mut inside_seen = false;
    loop {
        if t >= opts.max_length {
            return Ok(GeodesicPath {
                samples,
                exit_time: f64::INFINITY,
                classification: EntryClassification::Trapped,
                entry: (*x0, *v0),
            });
        }
        let (nx, nv) = rk4_step(chart, &x, &v, opts.step)?;
        let b_next = chart.boundary_value(&nx);
        if chart.boundary_value(&x) < 0.0 {
            inside_seen = true;
        }
        if inside_seen && b_next >= 0.0 {
            // Bisection on the last step for the exit time.
            let mut lo = 0.0;
            let mut hi = opts.step;
            for _ in 0..128 {
                if hi - lo <= opts.bisection_tol {
                    break;
                }
                let mid = 0.5 * (lo + hi);
                let (mx, _) = rk4_step(chart, &x, &v, mid)?;
                if chart.boundary_value(&mx) >= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let dt = 0.5 * (lo + hi);
            let (ex, ev) = rk4_step(chart, &x, &v, dt)?;
            let exit_time = t + dt;
            samples.push(GeodesicSample {
                t: exit_time,
                x: ex,
                v: ev,
            });
            let exit_nu = chart.outward_normal(&ex)?;
            let exit_vn = chart.inner(&ex, &ev, &exit_nu);
            let classification = if entry_tangential || exit_vn.abs() <= opts.tangency_threshold
            {
                EntryClassification::Tangential
            } else {
                EntryClassification::NonTangential
            };
            return Ok(GeodesicPath {
                samples,
                exit_time,
                classification,
                entry: (*x0, *v0),
            });
        }
        x = nx;
        v = nv;
        t += opts.step;
        samples.push(GeodesicSample { t, x, v });
    }
}

/// Fan of geodesics from `n_points` boundary points and `n_dirs` inward
/// directions each, filtered to the non-tangential ones.
pub fn boundary_fan(
    chart: &MetricChart,
    n_points: usize,
    n_dirs: usize,
    opts: &GeodesicOptions,
    mode: ExecMode,
) -> Result<Vec<GeodesicPath>> {
    if !chart.has_boundary_curve() {
        return Err(CoreError::Geometry(
            "boundary fan needs a parametrized boundary".into(),
        ));
    }
    let mut seeds = Vec::with_capacity(n_points * n_dirs);
    for ip in 0..n_points {
        let theta = std::f64::consts::TAU * ip as f64 / n_points as f64;
        let x0 = chart.boundary_point(theta)?;
        let nu = chart.outward_normal(&x0)?;
        // Orthonormal tangent at the boundary point.
        let tau = unit_tangent_2d(chart, &x0, &nu);
        for id in 0..n_dirs {
            // Spread directions away from the tangential limits.
            let beta = -std::f64::consts::FRAC_PI_2
                + std::f64::consts::PI * (id as f64 + 1.0) / (n_dirs as f64 + 1.0);
            let v0 = -nu * beta.cos() + tau * beta.sin();
            seeds.push((x0, v0));
        }
    }
    let results = map_slice(mode, &seeds, |(x0, v0)| {
        integrate_geodesic(chart, x0, v0, opts)
    });
    let mut fan = Vec::new();
    for r in results {
        match r {
            Ok(p) if p.classification == EntryClassification::NonTangential => fan.push(p),
            Ok(_) => {}
            Err(e) => return Err(e),
        }
    }
    if fan.is_empty() {
        return Err(CoreError::Config(
            "boundary fan is empty after tangency filtering".into(),
        ));
    }
    Ok(fan)
}

/// Unit vector g-orthogonal to `nu` at `x` (2-dimensional charts).
fn unit_tangent_2d(chart: &MetricChart, x: &Pt, nu: &Pt) -> Pt {
    let g = chart.metric(x);
    let sd = chart.sqrt_det(x);
    let nu_cov = g * *nu;
    let mut tau = Pt::zeros();
    tau[0] = nu_cov[1] / sd;
    tau[1] = -nu_cov[0] / sd;
    tau
}
