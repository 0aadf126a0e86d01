//! Coordinate charts with metric closures.
//!
//! Charts are at most 3-dimensional (the transversal dimension is fixed to 2,
//! products with the x1-line give 3). Metrics are stored as 3x3 matrices
//! padded with the identity beyond `dim`, so determinants and inverses of the
//! padded matrix agree with those of the active block.

use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};

use crate::error::{CoreError, Result};

pub type Mat3 = Matrix3<f64>;
pub type Pt = Vector3<f64>;

type MetricFn = Arc<dyn Fn(&Pt) -> Mat3 + Send + Sync>;
type ScalarFn = Arc<dyn Fn(&Pt) -> f64 + Send + Sync>;
type CurveFn = Arc<dyn Fn(f64) -> Pt + Send + Sync>;
type ChristoffelFn = Arc<dyn Fn(&Pt) -> [Mat3; 3] + Send + Sync>;

#[derive(Clone)]
pub struct MetricChart {
    pub dim: usize,
    pub name: String,
    metric_fn: MetricFn,
    /// Optional analytic Christoffel hook; finite differences otherwise.
    christoffel_fn: Option<ChristoffelFn>,
    /// Conformal factor of the ambient product metric g = c (e + g0).
    conformal_fn: ScalarFn,
    /// Signed distance-like boundary function, negative inside the manifold.
    boundary_fn: ScalarFn,
    /// Box on which the metric formulas are valid (strictly larger than the
    /// manifold itself so stencils and bisection may poke past the boundary).
    pub valid_lo: Vec<f64>,
    pub valid_hi: Vec<f64>,
    /// Parametrization of the manifold boundary, one closed curve.
    boundary_curve: Option<CurveFn>,
    /// Wrap lengths for periodic (torus) charts.
    pub periodic_lengths: Option<Vec<f64>>,
    /// Metric is identically Euclidean in chart coordinates.
    pub flat: bool,
    /// Finite-difference step for metric derivatives.
    pub fd_step: f64,
}

impl std::fmt::Debug for MetricChart {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MetricChart")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("flat", &self.flat)
            .finish()
    }
}

pub fn pt(coords: &[f64]) -> Pt {
    let mut p = Pt::zeros();
    for (i, &c) in coords.iter().enumerate().take(3) {
        p[i] = c;
    }
    p
}

impl MetricChart {
    pub fn builder(dim: usize, name: &str) -> ChartBuilder {
        ChartBuilder {
            dim,
            name: name.to_string(),
            metric_fn: None,
            christoffel_fn: None,
            conformal_fn: None,
            boundary_fn: None,
            valid_lo: vec![-1e6; dim],
            valid_hi: vec![1e6; dim],
            boundary_curve: None,
            periodic_lengths: None,
            flat: false,
            fd_step: None,
        }
    }

    /// Flat unit-style disk of the given radius.
    pub fn euclidean_disk(radius: f64) -> Self {
        let r = radius;
        Self::builder(2, "euclidean_disk")
            .metric(move |_| Mat3::identity())
            .flat()
            .boundary(move |x: &Pt| (x[0] * x[0] + x[1] * x[1]).sqrt() - r)
            .boundary_curve(move |th: f64| pt(&[r * th.cos(), r * th.sin()]))
            .valid_box(&[-3.0 * r, -3.0 * r], &[3.0 * r, 3.0 * r])
            .build()
    }

    /// Disk with conformally flat metric w(x) * delta, w > 0.
    pub fn conformal_disk<W>(radius: f64, weight: W) -> Self
    where
        W: Fn(&Pt) -> f64 + Send + Sync + 'static,
    {
        let r = radius;
        Self::builder(2, "conformal_disk")
            .metric(move |x: &Pt| {
                let w = weight(x);
                let mut m = Mat3::identity();
                m[(0, 0)] = w;
                m[(1, 1)] = w;
                m
            })
            .boundary(move |x: &Pt| (x[0] * x[0] + x[1] * x[1]).sqrt() - r)
            .boundary_curve(move |th: f64| pt(&[r * th.cos(), r * th.sin()]))
            .valid_box(&[-2.0 * r, -2.0 * r], &[2.0 * r, 2.0 * r])
            .build()
    }

    /// Spherical cap {x in S^2 : x_3 >= alpha0} in the stereographic chart
    /// from the south pole, metric 4 (1 + |y|^2)^{-2} delta. The cap maps to
    /// the disk of radius sqrt((1 - alpha0)/(1 + alpha0)); the chart stays
    /// smooth across the equator, so the hemisphere is representable.
    pub fn spherical_cap(alpha0: f64) -> Self {
        assert!((0.0..1.0).contains(&alpha0), "cap parameter must be in [0,1)");
        let rho = ((1.0 - alpha0) / (1.0 + alpha0)).sqrt();
        Self::builder(2, "spherical_cap")
            .metric(move |x: &Pt| {
                let w = 4.0 / (1.0 + x[0] * x[0] + x[1] * x[1]).powi(2);
                let mut m = Mat3::identity();
                m[(0, 0)] = w;
                m[(1, 1)] = w;
                m
            })
            .boundary(move |x: &Pt| (x[0] * x[0] + x[1] * x[1]).sqrt() - rho)
            .boundary_curve(move |th: f64| pt(&[rho * th.cos(), rho * th.sin()]))
            .valid_box(&[-4.0, -4.0], &[4.0, 4.0])
            .build()
    }

    /// Flat annulus r_in <= |x| <= r_out; the parametrized boundary curve is
    /// the outer circle.
    pub fn annulus(r_in: f64, r_out: f64) -> Self {
        assert!(0.0 < r_in && r_in < r_out);
        Self::builder(2, "annulus")
            .metric(|_| Mat3::identity())
            .flat()
            .boundary(move |x: &Pt| {
                let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
                (r - r_out).max(r_in - r)
            })
            .boundary_curve(move |th: f64| pt(&[r_out * th.cos(), r_out * th.sin()]))
            .valid_box(&[-2.0 * r_out, -2.0 * r_out], &[2.0 * r_out, 2.0 * r_out])
            .build()
    }

    /// Flat box [lo, hi]; the boundary function is the box signed distance.
    pub fn flat_slab(lo: &[f64], hi: &[f64]) -> Self {
        assert_eq!(lo.len(), hi.len());
        let dim = lo.len();
        let lov = lo.to_vec();
        let hiv = hi.to_vec();
        let lov2 = lov.clone();
        let hiv2 = hiv.clone();
        let pad: Vec<f64> = lov.iter().zip(&hiv).map(|(a, b)| 0.5 * (b - a)).collect();
        let vlo: Vec<f64> = lov.iter().zip(&pad).map(|(a, p)| a - p).collect();
        let vhi: Vec<f64> = hiv.iter().zip(&pad).map(|(a, p)| a + p).collect();
        Self::builder(dim, "flat_slab")
            .metric(|_| Mat3::identity())
            .flat()
            .boundary(move |x: &Pt| {
                let mut d = f64::NEG_INFINITY;
                for k in 0..lov2.len() {
                    d = d.max(lov2[k] - x[k]).max(x[k] - hiv2[k]);
                }
                d
            })
            .valid_box(&vlo, &vhi)
            .build()
    }

    /// Flat torus (both axes periodic with the given lengths) with a round
    /// hole removed; the hole circle is the manifold boundary.
    pub fn flat_torus_sector(lengths: [f64; 2], hole_center: [f64; 2], hole_radius: f64) -> Self {
        let lens = lengths;
        let hc = hole_center;
        let hr = hole_radius;
        Self::builder(2, "flat_torus_sector")
            .metric(|_| Mat3::identity())
            .flat()
            .boundary(move |x: &Pt| {
                let d2 = torus_dist2([x[0], x[1]], hc, lens);
                hr - d2.sqrt()
            })
            .boundary_curve(move |th: f64| {
                pt(&[hc[0] + hr * th.cos(), hc[1] + hr * th.sin()])
            })
            .periodic(&[lens[0], lens[1]])
            .valid_box(
                &[-2.0 * lens[0], -2.0 * lens[1]],
                &[2.0 * lens[0], 2.0 * lens[1]],
            )
            .build()
    }

    /// Product chart R x M0 with metric c * (e + g0); coordinate 0 is x1.
    pub fn product(transversal: &MetricChart, x1_lo: f64, x1_hi: f64) -> Self {
        assert_eq!(transversal.dim, 2);
        let t = transversal.clone();
        let tb = transversal.clone();
        let mut vlo = vec![x1_lo - 0.5 * (x1_hi - x1_lo)];
        vlo.extend_from_slice(&transversal.valid_lo);
        let mut vhi = vec![x1_hi + 0.5 * (x1_hi - x1_lo)];
        vhi.extend_from_slice(&transversal.valid_hi);
        let flat = transversal.flat;
        Self::builder(3, &format!("product({})", transversal.name))
            .metric(move |x: &Pt| {
                let xp = pt(&[x[1], x[2]]);
                let g0 = t.metric(&xp);
                let mut m = Mat3::identity();
                m[(1, 1)] = g0[(0, 0)];
                m[(1, 2)] = g0[(0, 1)];
                m[(2, 1)] = g0[(1, 0)];
                m[(2, 2)] = g0[(1, 1)];
                m
            })
            .boundary(move |x: &Pt| {
                let xp = pt(&[x[1], x[2]]);
                let db = tb.boundary_value(&xp);
                db.max(x1_lo - x[0]).max(x[0] - x1_hi)
            })
            .valid_box(&vlo, &vhi)
            .flat_if(flat)
            .build()
    }

    /// Attach a conformal factor c(x) > 0 (the full metric is c * g).
    pub fn with_conformal_factor<C>(mut self, c: C) -> Self
    where
        C: Fn(&Pt) -> f64 + Send + Sync + 'static,
    {
        self.conformal_fn = Arc::new(c);
        self
    }

    pub fn metric(&self, x: &Pt) -> Mat3 {
        (self.metric_fn)(x)
    }

    pub fn conformal_factor(&self, x: &Pt) -> f64 {
        (self.conformal_fn)(x)
    }

    /// Full metric including the conformal factor, padded to 3x3.
    pub fn metric_full(&self, x: &Pt) -> Mat3 {
        let c = self.conformal_factor(x);
        let mut m = self.metric(x) * c;
        for k in self.dim..3 {
            m[(k, k)] = 1.0;
        }
        m
    }

    pub fn metric_inv(&self, x: &Pt) -> Mat3 {
        self.metric(x)
            .try_inverse()
            .expect("metric must be invertible on the valid box")
    }

    pub fn sqrt_det(&self, x: &Pt) -> f64 {
        self.metric(x).determinant().max(0.0).sqrt()
    }

    pub fn boundary_value(&self, x: &Pt) -> f64 {
        (self.boundary_fn)(x)
    }

    pub fn boundary_point(&self, theta: f64) -> Result<Pt> {
        match &self.boundary_curve {
            Some(c) => Ok(c(theta)),
            None => Err(CoreError::Geometry(format!(
                "chart {} has no boundary parametrization",
                self.name
            ))),
        }
    }

    pub fn has_boundary_curve(&self) -> bool {
        self.boundary_curve.is_some()
    }

    pub fn in_valid_box(&self, x: &Pt) -> bool {
        (0..self.dim).all(|k| x[k] >= self.valid_lo[k] && x[k] <= self.valid_hi[k])
    }

    pub fn is_inside(&self, x: &Pt) -> bool {
        self.boundary_value(x) < 0.0
    }

    /// Riemannian inner product of two vectors at x.
    pub fn inner(&self, x: &Pt, u: &Pt, v: &Pt) -> f64 {
        (self.metric(x) * v).dot(u)
    }

    pub fn norm(&self, x: &Pt, v: &Pt) -> f64 {
        self.inner(x, v, v).max(0.0).sqrt()
    }

    /// Unit outward conormal direction (as a vector) at a boundary point.
    pub fn outward_normal(&self, x: &Pt) -> Result<Pt> {
        let h = self.fd_step;
        let mut grad = Pt::zeros();
        for k in 0..self.dim {
            let mut xp = *x;
            let mut xm = *x;
            xp[k] += h;
            xm[k] -= h;
            grad[k] = (self.boundary_value(&xp) - self.boundary_value(&xm)) / (2.0 * h);
        }
        let ginv = self.metric_inv(x);
        let mut n = ginv * grad;
        for k in self.dim..3 {
            n[k] = 0.0;
        }
        let nn = self.norm(x, &n);
        if nn < 1e-12 {
            return Err(CoreError::Geometry(
                "degenerate boundary gradient".to_string(),
            ));
        }
        Ok(n / nn)
    }

    /// Christoffel symbols Gamma^i_{jk}; result[i][(j,k)].
    pub fn christoffel(&self, x: &Pt) -> Result<[Mat3; 3]> {
        if !self.in_valid_box(x) {
            return Err(CoreError::Domain(format!(
                "point {:?} outside the valid box of chart {}",
                &x.as_slice()[..self.dim],
                self.name
            )));
        }
        if let Some(f) = &self.christoffel_fn {
            return Ok(f(x));
        }
        if self.flat {
            return Ok([Mat3::zeros(), Mat3::zeros(), Mat3::zeros()]);
        }
        let g = self.metric(x);
        let det = g.determinant();
        if !det.is_finite() || det.abs() < 1e-12 {
            return Err(CoreError::Conditioning(format!(
                "near-singular metric at {:?} (det = {det:.3e})",
                &x.as_slice()[..self.dim]
            )));
        }
        let ginv = g.try_inverse().ok_or_else(|| {
            CoreError::Conditioning("metric inversion failed".to_string())
        })?;
        // 4th-order central differences of the metric components.
        let h = self.fd_step;
        let mut dg = [Mat3::zeros(); 3];
        for (k, dgk) in dg.iter_mut().enumerate().take(self.dim) {
            let mut xs = [*x, *x, *x, *x];
            xs[0][k] -= 2.0 * h;
            xs[1][k] -= h;
            xs[2][k] += h;
            xs[3][k] += 2.0 * h;
            let m0 = self.metric(&xs[0]);
            let m1 = self.metric(&xs[1]);
            let m2 = self.metric(&xs[2]);
            let m3 = self.metric(&xs[3]);
            *dgk = (m0 - m1 * 8.0 + m2 * 8.0 - m3) * (1.0 / (12.0 * h));
        }
        let mut gamma = [Mat3::zeros(); 3];
        for i in 0..self.dim {
            for j in 0..self.dim {
                for k in 0..self.dim {
                    let mut s = 0.0;
                    for l in 0..self.dim {
                        s += ginv[(i, l)] * (dg[j][(l, k)] + dg[k][(l, j)] - dg[l][(j, k)]);
                    }
                    gamma[i][(j, k)] = 0.5 * s;
                }
            }
        }
        Ok(gamma)
    }

    /// Wrap a point into the fundamental domain of a periodic chart.
    pub fn wrap(&self, x: &Pt) -> Pt {
        match &self.periodic_lengths {
            None => *x,
            Some(lens) => {
                let mut w = *x;
                for (k, &l) in lens.iter().enumerate() {
                    w[k] = w[k].rem_euclid(l);
                }
                w
            }
        }
    }

    /// Gauss curvature of a 2-dimensional chart at x (finite differences of
    /// the Christoffel symbols).
    pub fn gauss_curvature(&self, x: &Pt) -> Result<f64> {
        assert_eq!(self.dim, 2, "curvature implemented for transversal charts");
        if self.flat {
            return Ok(0.0);
        }
        let h = self.fd_step * 10.0;
        let gam = |p: &Pt| self.christoffel(p);
        let mut xp = *x;
        let mut xm = *x;
        xp[0] += h;
        xm[0] -= h;
        let g_xp = gam(&xp)?;
        let g_xm = gam(&xm)?;
        let mut yp = *x;
        let mut ym = *x;
        yp[1] += h;
        ym[1] -= h;
        let g_yp = gam(&yp)?;
        let g_ym = gam(&ym)?;
        let g0 = gam(x)?;
        // R^i_{212} = d_1 Gamma^i_{22} - d_2 Gamma^i_{12} + Gamma^i_{1m} Gamma^m_{22}
        //             - Gamma^i_{2m} Gamma^m_{12}
        let mut r = [0.0; 2];
        for (i, ri) in r.iter_mut().enumerate() {
            let d1 = (g_xp[i][(1, 1)] - g_xm[i][(1, 1)]) / (2.0 * h);
            let d2 = (g_yp[i][(0, 1)] - g_ym[i][(0, 1)]) / (2.0 * h);
            let mut quad = 0.0;
            for m in 0..2 {
                quad += g0[i][(0, m)] * g0[m][(1, 1)] - g0[i][(1, m)] * g0[m][(0, 1)];
            }
            *ri = d1 - d2 + quad;
        }
        let g = self.metric(x);
        let r1212 = g[(0, 0)] * r[0] + g[(0, 1)] * r[1];
        let det = g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)];
        Ok(r1212 / det)
    }
}

pub struct ChartBuilder {
    dim: usize,
    name: String,
    metric_fn: Option<MetricFn>,
    christoffel_fn: Option<ChristoffelFn>,
    conformal_fn: Option<ScalarFn>,
    boundary_fn: Option<ScalarFn>,
    valid_lo: Vec<f64>,
    valid_hi: Vec<f64>,
    boundary_curve: Option<CurveFn>,
    periodic_lengths: Option<Vec<f64>>,
    flat: bool,
    fd_step: Option<f64>,
}

impl ChartBuilder {
    pub fn metric<F>(mut self, f: F) -> Self
    where
        F: Fn(&Pt) -> Mat3 + Send + Sync + 'static,
    {
        self.metric_fn = Some(Arc::new(f));
        self
    }

    pub fn christoffel<F>(mut self, f: F) -> Self
    where
        F: Fn(&Pt) -> [Mat3; 3] + Send + Sync + 'static,
    {
        self.christoffel_fn = Some(Arc::new(f));
        self
    }

    pub fn boundary<F>(mut self, f: F) -> Self
    where
        F: Fn(&Pt) -> f64 + Send + Sync + 'static,
    {
        self.boundary_fn = Some(Arc::new(f));
        self
    }

    pub fn boundary_curve<F>(mut self, f: F) -> Self
    where
        F: Fn(f64) -> Pt + Send + Sync + 'static,
    {
        self.boundary_curve = Some(Arc::new(f));
        self
    }

    pub fn valid_box(mut self, lo: &[f64], hi: &[f64]) -> Self {
        self.valid_lo = lo.to_vec();
        self.valid_hi = hi.to_vec();
        self
    }

    pub fn periodic(mut self, lengths: &[f64]) -> Self {
        self.periodic_lengths = Some(lengths.to_vec());
        self
    }

    pub fn flat(mut self) -> Self {
        self.flat = true;
        self
    }

    pub fn flat_if(mut self, yes: bool) -> Self {
        self.flat = yes;
        self
    }

    pub fn fd_step(mut self, h: f64) -> Self {
        self.fd_step = Some(h);
        self
    }

    pub fn build(self) -> MetricChart {
        let diameter: f64 = self
            .valid_lo
            .iter()
            .zip(&self.valid_hi)
            .map(|(a, b)| b - a)
            .fold(0.0, f64::max);
        MetricChart {
            dim: self.dim,
            name: self.name,
            metric_fn: self.metric_fn.expect("metric closure required"),
            christoffel_fn: self.christoffel_fn,
            conformal_fn: self
                .conformal_fn
                .unwrap_or_else(|| Arc::new(|_: &Pt| 1.0)),
            boundary_fn: self
                .boundary_fn
                .unwrap_or_else(|| Arc::new(|_: &Pt| -1.0)),
            valid_lo: self.valid_lo,
            valid_hi: self.valid_hi,
            boundary_curve: self.boundary_curve,
            periodic_lengths: self.periodic_lengths,
            flat: self.flat,
            fd_step: self.fd_step.unwrap_or(1e-4 * diameter),
        }
    }
}

fn torus_dist2(x: [f64; 2], c: [f64; 2], lens: [f64; 2]) -> f64 {
    let mut d2 = 0.0;
    for k in 0..2 {
        let raw = (x[k] - c[k]).rem_euclid(lens[k]);
        let d = raw.min(lens[k] - raw);
        d2 += d * d;
    }
    d2
}

/// Checks the spec invariants of a chart on a sample of interior points:
/// symmetry and positive definiteness of the metric, positivity of the
/// conformal factor, and the product block structure when `dim == 3`.
pub fn validate_chart(chart: &MetricChart, samples: &[Pt]) -> Result<()> {
    for x in samples {
        let g = chart.metric(x);
        let asym = (g - g.transpose()).norm();
        if asym > 1e-12 {
            return Err(CoreError::Geometry(format!(
                "metric asymmetry {asym:.3e} at {:?}",
                &x.as_slice()[..chart.dim]
            )));
        }
        let eig = g.symmetric_eigenvalues();
        let min_eig = (0..chart.dim).map(|k| eig[k]).fold(f64::INFINITY, f64::min);
        if min_eig <= 0.0 {
            return Err(CoreError::Geometry(format!(
                "metric not positive definite (min eigenvalue {min_eig:.3e})"
            )));
        }
        if chart.conformal_factor(x) <= 0.0 {
            return Err(CoreError::Geometry("conformal factor must be positive".into()));
        }
        if chart.dim == 3 {
            let ok = (g[(0, 0)] - 1.0).abs() < 1e-12
                && g[(0, 1)].abs() < 1e-12
                && g[(0, 2)].abs() < 1e-12;
            if !ok {
                return Err(CoreError::Geometry(
                    "product chart must have e + g0 block structure".into(),
                ));
            }
        }
    }
    Ok(())
}
