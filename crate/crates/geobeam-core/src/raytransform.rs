//! Attenuated geodesic ray transform of (function, 1-form) pairs: forward
//! integrals over boundary fans, regularized least-squares inversion on a
//! tensor Legendre basis, and gauge projection of 1-forms.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{CoreError, Result};
use crate::fields::{SampledField, SampledOneForm};
use crate::geometry::{pt, GeodesicPath, Pt};
use crate::grid::{integrate_uniform, GridSpec};
use crate::par::{map_slice, ExecMode};

#[derive(Debug, Clone)]
pub struct RayMeasurement {
    pub fan: Vec<GeodesicPath>,
    pub values: Vec<Complex64>,
    /// Constant attenuation weight e^{-lambda t}.
    pub attenuation: f64,
    pub quadrature_step: f64,
}

impl RayMeasurement {
    /// Sinogram rows: entry point, entry direction, exit time, Re, Im.
    pub fn sinogram_rows(&self) -> Vec<[f64; 7]> {
        self.fan
            .iter()
            .zip(&self.values)
            .map(|(p, v)| {
                let (x, xi) = p.entry;
                [x[0], x[1], xi[0], xi[1], p.exit_time, v.re, v.im]
            })
            .collect()
    }
}

/// Forward transform with caller-provided samplers; `scalar` and `one_form`
/// give f and the covector components of alpha at a chart point.
pub fn forward_with<F, A>(
    scalar: F,
    one_form: A,
    fan: &[GeodesicPath],
    lambda: f64,
    quadrature_step: f64,
    mode: ExecMode,
) -> Result<RayMeasurement>
where
    F: Fn(&Pt) -> Complex64 + Sync,
    A: Fn(&Pt) -> [Complex64; 2] + Sync,
{
    let values = map_slice(mode, fan, |path| -> Result<Complex64> {
        let n = (path.exit_time / quadrature_step).ceil() as usize + 1;
        let n = n.max(3);
        let step = path.exit_time / (n - 1) as f64;
        let mut integrand = Vec::with_capacity(n);
        for k in 0..n {
            let t = k as f64 * step;
            let x = path.point_at(t);
            let v = path.velocity_at(t);
            let a = one_form(&x);
            let val = (scalar(&x) + a[0] * v[0] + a[1] * v[1]) * (-lambda * t).exp();
            if !val.re.is_finite() || !val.im.is_finite() {
                return Err(CoreError::Sampling(
                    "non-finite sample along geodesic".into(),
                ));
            }
            integrand.push(val);
        }
        Ok(integrate_uniform(&integrand, step))
    });
    let mut out = Vec::with_capacity(values.len());
    for v in values {
        out.push(v?);
    }
    Ok(RayMeasurement {
        fan: fan.to_vec(),
        values: out,
        attenuation: lambda,
        quadrature_step,
    })
}

/// Forward transform of sampled data (bilinear interpolation along the fan).
pub fn forward(
    f: &SampledField,
    alpha: &SampledOneForm,
    fan: &[GeodesicPath],
    lambda: f64,
    quadrature_step: f64,
    mode: ExecMode,
) -> Result<RayMeasurement> {
    // Bail out early if any geodesic leaves the sampled region.
    for path in fan {
        for s in &path.samples {
            let w = f.chart.wrap(&s.x);
            if !f.grid.contains(&[w[0], w[1]]) {
                return Err(CoreError::Sampling(
                    "geodesic leaves the field grid".into(),
                ));
            }
        }
    }
    forward_with(
        |x| f.eval(&f.chart.wrap(x)),
        |x| {
            let c = alpha.eval(&alpha.chart.wrap(x));
            [c[0], c[1]]
        },
        fan,
        lambda,
        quadrature_step,
        mode,
    )
}

/// Normalized Legendre value and derivative on [-1, 1].
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    let (mut d0, mut d1) = (0.0, 1.0);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        let d2 = d0 + (2.0 * kf - 1.0) * p1;
        p0 = p1;
        p1 = p2;
        d0 = d1;
        d1 = d2;
    }
    (p1, d1)
}

#[derive(Debug, Clone)]
pub struct InversionBasis {
    pub order: usize,
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

impl InversionBasis {
    fn eval(&self, i: usize, j: usize, x: &Pt) -> (f64, [f64; 2]) {
        let sx = 2.0 * (x[0] - self.lo[0]) / (self.hi[0] - self.lo[0]) - 1.0;
        let sy = 2.0 * (x[1] - self.lo[1]) / (self.hi[1] - self.lo[1]) - 1.0;
        let jx = 2.0 / (self.hi[0] - self.lo[0]);
        let jy = 2.0 / (self.hi[1] - self.lo[1]);
        let ni = ((2 * i + 1) as f64 / 2.0).sqrt();
        let nj = ((2 * j + 1) as f64 / 2.0).sqrt();
        let (pi, di) = legendre(i, sx.clamp(-1.0, 1.0));
        let (pj, dj) = legendre(j, sy.clamp(-1.0, 1.0));
        let v = ni * nj * pi * pj;
        (v, [ni * nj * di * pj * jx, ni * nj * pi * dj * jy])
    }

    fn len(&self) -> usize {
        self.order * self.order
    }
}

#[derive(Debug, Clone)]
pub struct InversionResult {
    pub f_hat: SampledField,
    pub alpha_hat: SampledOneForm,
    /// L2 norm of d(alpha_hat) over the output grid.
    pub curl_norm: f64,
    /// L2 norm of the solenoidal part of alpha_hat.
    pub solenoidal_norm: f64,
}

/// Least-squares inversion of a fan measurement for (f, alpha) on a tensor
/// Legendre basis with a Tikhonov smoother ||f||^2 + ||d alpha||^2 +
/// ||div alpha||^2; reports a gauge certificate alongside the estimates.
pub fn invert(
    meas: &RayMeasurement,
    out_grid: &GridSpec,
    basis: &InversionBasis,
    ridge: f64,
    mode: ExecMode,
) -> Result<InversionResult> {
    if meas.attenuation.abs() > 1.0 {
        return Err(CoreError::Parameter(
            "inversion restricted to |lambda| <= 1".into(),
        ));
    }
    let nb = basis.len();
    let ncols = 3 * nb;
    let nrows = meas.fan.len();
    if nrows < ncols / 4 {
        return Err(CoreError::Config(format!(
            "need at least {} geodesics for {} unknowns",
            ncols / 4,
            ncols
        )));
    }
    let lambda = meas.attenuation;
    let step = meas.quadrature_step;

    // Row assembly per geodesic (parallel), then sequential accumulation.
    let rows: Vec<Vec<f64>> = map_slice(mode, &meas.fan, |path| {
        let mut row = vec![0.0; ncols];
        let n = ((path.exit_time / step).ceil() as usize + 1).max(3);
        let dt = path.exit_time / (n - 1) as f64;
        for k in 0..n {
            let t = k as f64 * dt;
            // Composite Simpson weights for uniform samples.
            let w = simpson_weight(k, n) * dt * (-lambda * t).exp();
            let x = path.point_at(t);
            let v = path.velocity_at(t);
            for bi in 0..basis.order {
                for bj in 0..basis.order {
                    let (val, _) = basis.eval(bi, bj, &x);
                    let col = bi * basis.order + bj;
                    row[col] += w * val;
                    row[nb + col] += w * val * v[0];
                    row[2 * nb + col] += w * val * v[1];
                }
            }
        }
        row
    });

    let mut gtg = DMatrix::<f64>::zeros(ncols, ncols);
    let mut rhs_re = DVector::<f64>::zeros(ncols);
    let mut rhs_im = DVector::<f64>::zeros(ncols);
    for (row, val) in rows.iter().zip(&meas.values) {
        for a in 0..ncols {
            let ra = row[a];
            if ra == 0.0 {
                continue;
            }
            rhs_re[a] += ra * val.re;
            rhs_im[a] += ra * val.im;
            for b in a..ncols {
                gtg[(a, b)] += ra * row[b];
            }
        }
    }
    for a in 0..ncols {
        for b in 0..a {
            gtg[(a, b)] = gtg[(b, a)];
        }
    }

    // Smoother: ||f||^2 (orthonormal basis: identity) plus quadrature forms
    // for ||curl alpha||^2 and ||div alpha||^2.
    for a in 0..nb {
        gtg[(a, a)] += ridge;
    }
    let qn = 24usize;
    let mut curl_rows: Vec<Vec<f64>> = Vec::new();
    let mut div_rows: Vec<Vec<f64>> = Vec::new();
    let wq = (basis.hi[0] - basis.lo[0]) * (basis.hi[1] - basis.lo[1]) / (qn * qn) as f64;
    for qi in 0..qn {
        for qj in 0..qn {
            let x = pt(&[
                basis.lo[0] + (qi as f64 + 0.5) * (basis.hi[0] - basis.lo[0]) / qn as f64,
                basis.lo[1] + (qj as f64 + 0.5) * (basis.hi[1] - basis.lo[1]) / qn as f64,
            ]);
            let mut curl = vec![0.0; 2 * nb];
            let mut div = vec![0.0; 2 * nb];
            for bi in 0..basis.order {
                for bj in 0..basis.order {
                    let (_, grad) = basis.eval(bi, bj, &x);
                    let col = bi * basis.order + bj;
                    // curl = d1 a2 - d2 a1, div = d1 a1 + d2 a2.
                    curl[col] -= grad[1];
                    curl[nb + col] += grad[0];
                    div[col] += grad[0];
                    div[nb + col] += grad[1];
                }
            }
            curl_rows.push(curl);
            div_rows.push(div);
        }
    }
    for rows in [&curl_rows, &div_rows] {
        for row in rows.iter() {
            for a in 0..2 * nb {
                if row[a] == 0.0 {
                    continue;
                }
                for b in 0..2 * nb {
                    gtg[(nb + a, nb + b)] += ridge * wq * row[a] * row[b];
                }
            }
        }
    }
    for a in 0..ncols {
        gtg[(a, a)] += 1e-12;
    }

    let chol = gtg.clone().cholesky().ok_or_else(|| {
        CoreError::Conditioning(
            "normal system rank-deficient beyond the gauge kernel".into(),
        )
    })?;
    let sol_re = chol.solve(&rhs_re);
    let sol_im = chol.solve(&rhs_im);

    let coef = |k: usize| Complex64::new(sol_re[k], sol_im[k]);
    let chart = meas
        .fan
        .first()
        .map(|_| ())
        .ok_or_else(|| CoreError::Config("empty fan".into()))?;
    let _ = chart;

    // Evaluate on the output grid.
    let eval_at = |x: &Pt, block: usize| -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for bi in 0..basis.order {
            for bj in 0..basis.order {
                let (val, _) = basis.eval(bi, bj, x);
                acc += coef(block * nb + bi * basis.order + bj) * val;
            }
        }
        acc
    };
    // The output fields reuse the chart of the first geodesic's ambient via
    // the caller-provided grid; a flat placeholder chart keeps them usable.
    let chart2 = crate::geometry::MetricChart::flat_slab(
        &[out_grid.mins[0], out_grid.mins[1]],
        &[
            out_grid.axis_coord(0, out_grid.shape[0] - 1),
            out_grid.axis_coord(1, out_grid.shape[1] - 1),
        ],
    );
    let f_hat = SampledField::from_fn(&chart2, out_grid, |x| eval_at(x, 0));
    let alpha_hat = SampledOneForm::from_fn(&chart2, out_grid, |x| {
        vec![eval_at(x, 1), eval_at(x, 2)]
    });
    let (curl, sol) = gauge_project(&alpha_hat, GaugeOptions::default())?;
    let curl_norm = crate::fields::l2_norm(&curl);
    let mut sol_sq = 0.0;
    for k in 0..2 {
        for i in 0..out_grid.len() {
            sol_sq += sol.components[k][i].norm_sqr() * out_grid.quad_weight(i);
        }
    }
    Ok(InversionResult {
        f_hat,
        alpha_hat,
        curl_norm,
        solenoidal_norm: sol_sq.sqrt(),
    })
}

fn simpson_weight(k: usize, n: usize) -> f64 {
    // Weights matching integrate_uniform: Simpson on the even prefix and a
    // 3/8 tail when the interval count is odd.
    let intervals = n - 1;
    let simpson_end = if intervals % 2 == 0 { n - 1 } else { n - 4 };
    let mut w = 0.0;
    if k <= simpson_end {
        let last = simpson_end;
        if k == 0 || k == last {
            w += 1.0 / 3.0;
        } else if (k % 2) == 1 {
            w += 4.0 / 3.0;
        } else {
            w += 2.0 / 3.0;
        }
    }
    if intervals % 2 != 0 && n >= 4 && k >= n - 4 {
        let j = k - (n - 4);
        w += match j {
            0 | 3 => 3.0 / 8.0,
            _ => 9.0 / 8.0,
        };
    }
    w
}

#[derive(Debug, Clone, Copy)]
pub struct GaugeOptions {
    pub cg_tol: f64,
    pub cg_max_iter: usize,
}

impl Default for GaugeOptions {
    fn default() -> Self {
        Self {
            cg_tol: 1e-13,
            cg_max_iter: 20000,
        }
    }
}

/// Splits a 1-form into (d alpha, solenoidal representative): d alpha by
/// antisymmetrized differences, and alpha - d p where p solves the discrete
/// Dirichlet least-squares fit min ||alpha - d p||_{L2} with p supported on
/// interior nodes.
pub fn gauge_project(
    alpha: &SampledOneForm,
    opts: GaugeOptions,
) -> Result<(SampledField, SampledOneForm)> {
    let grid = &alpha.grid;
    let d0a1 = grid.deriv_axis(&alpha.components[1], 0)?;
    let d1a0 = grid.deriv_axis(&alpha.components[0], 1)?;
    let curl = SampledField {
        chart: alpha.chart.clone(),
        grid: grid.clone(),
        values: d0a1
            .iter()
            .zip(&d1a0)
            .map(|(a, b)| a - b)
            .collect(),
    };

    // DOFs: nodes strictly inside the chart (p = 0 elsewhere). The gradient
    // stencil is the 4th-order central difference with zero extension.
    let n = grid.len();
    let mut dof = vec![usize::MAX; n];
    let mut dof_nodes = Vec::new();
    for i in 0..n {
        let x = pt(&grid.node(i));
        if alpha.chart.is_inside(&x) && grid.is_interior(i, 2) {
            dof[i] = dof_nodes.len();
            dof_nodes.push(i);
        }
    }
    let ndof = dof_nodes.len();
    if ndof == 0 {
        return Ok((curl, alpha.clone()));
    }

    let (nx, ny) = (grid.shape[0], grid.shape[1]);
    let stride = [ny as isize, 1isize];
    let coeffs: [(isize, f64); 4] = [(-2, 1.0), (-1, -8.0), (1, 8.0), (2, -1.0)];
    let apply_d = |p: &[Complex64], axis: usize| -> Vec<Complex64> {
        let h = grid.steps[axis];
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for (flat, o) in out.iter_mut().enumerate() {
            let (i, j) = (flat / ny, flat % ny);
            let mut acc = Complex64::new(0.0, 0.0);
            for (off, c) in coeffs {
                let (ii, jj) = match axis {
                    0 => (i as isize + off, j as isize),
                    _ => (i as isize, j as isize + off),
                };
                if ii < 0 || jj < 0 || ii >= nx as isize || jj >= ny as isize {
                    continue;
                }
                let src = (ii * stride[0] + jj * stride[1]) as usize;
                acc += p[src] * c;
            }
            *o = acc / (12.0 * h);
        }
        out
    };
    let apply_dt = |q: &[Complex64], axis: usize| -> Vec<Complex64> {
        let h = grid.steps[axis];
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for (flat, o) in out.iter_mut().enumerate() {
            let (i, j) = (flat / ny, flat % ny);
            let mut acc = Complex64::new(0.0, 0.0);
            for (off, c) in coeffs {
                let (ii, jj) = match axis {
                    0 => (i as isize - off, j as isize),
                    _ => (i as isize, j as isize - off),
                };
                if ii < 0 || jj < 0 || ii >= nx as isize || jj >= ny as isize {
                    continue;
                }
                let src = (ii * stride[0] + jj * stride[1]) as usize;
                acc += q[src] * c;
            }
            *o = acc / (12.0 * h);
        }
        out
    };
    let embed = |p: &[Complex64]| -> Vec<Complex64> {
        let mut full = vec![Complex64::new(0.0, 0.0); n];
        for (k, &node) in dof_nodes.iter().enumerate() {
            full[node] = p[k];
        }
        full
    };
    let restrict = |full: &[Complex64]| -> Vec<Complex64> {
        dof_nodes.iter().map(|&node| full[node]).collect()
    };
    let apply_a = |p: &[Complex64]| -> Vec<Complex64> {
        let full = embed(p);
        let g0 = apply_d(&full, 0);
        let g1 = apply_d(&full, 1);
        let t0 = apply_dt(&g0, 0);
        let t1 = apply_dt(&g1, 1);
        let mut out = restrict(&t0);
        let r1 = restrict(&t1);
        for (o, r) in out.iter_mut().zip(r1) {
            *o += r;
        }
        out
    };
    // b = D^T alpha.
    let b = {
        let t0 = apply_dt(&alpha.components[0], 0);
        let t1 = apply_dt(&alpha.components[1], 1);
        let mut out = restrict(&t0);
        let r1 = restrict(&t1);
        for (o, r) in out.iter_mut().zip(r1) {
            *o += r;
        }
        out
    };

    // Conjugate gradients on the PSD normal operator.
    let mut p_sol = vec![Complex64::new(0.0, 0.0); ndof];
    let mut r = b.clone();
    let mut d = r.clone();
    let dot = |a: &[Complex64], b: &[Complex64]| -> f64 {
        a.iter().zip(b).map(|(x, y)| (x * y.conj()).re).sum()
    };
    let b_norm = dot(&b, &b).sqrt().max(1e-300);
    let mut rs = dot(&r, &r);
    for _ in 0..opts.cg_max_iter {
        if rs.sqrt() <= opts.cg_tol * b_norm {
            break;
        }
        let ad = apply_a(&d);
        let da = dot(&d, &ad);
        if da <= 0.0 {
            break;
        }
        let alpha_cg = rs / da;
        for k in 0..ndof {
            p_sol[k] += d[k] * alpha_cg;
            r[k] -= ad[k] * alpha_cg;
        }
        let rs_new = dot(&r, &r);
        let beta = rs_new / rs;
        rs = rs_new;
        for k in 0..ndof {
            d[k] = r[k] + d[k] * beta;
        }
    }

    let full = embed(&p_sol);
    let g0 = apply_d(&full, 0);
    let g1 = apply_d(&full, 1);
    let mut sol = alpha.clone();
    for i in 0..n {
        sol.components[0][i] -= g0[i];
        sol.components[1][i] -= g1[i];
    }
    Ok((curl, sol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{boundary_fan, GeodesicOptions, MetricChart};
    use approx::assert_relative_eq;

    fn disk_fan(n_pts: usize, n_dirs: usize) -> (MetricChart, Vec<GeodesicPath>) {
        let chart = MetricChart::euclidean_disk(1.0);
        let fan = boundary_fan(
            &chart,
            n_pts,
            n_dirs,
            &GeodesicOptions::default(),
            ExecMode::Parallel,
        )
        .unwrap();
        (chart, fan)
    }

    #[test]
    fn constant_f_gives_chord_length() {
        let (_, fan) = disk_fan(6, 3);
        let meas = forward_with(
            |_| Complex64::new(1.0, 0.0),
            |_| [Complex64::new(0.0, 0.0); 2],
            &fan,
            0.0,
            2e-3,
            ExecMode::Sequential,
        )
        .unwrap();
        for (path, v) in meas.fan.iter().zip(&meas.values) {
            assert_relative_eq!(v.re, path.exit_time, epsilon = 1e-9);
            assert!(v.im.abs() < 1e-12);
        }
    }

    #[test]
    fn exact_form_integrates_to_zero() {
        // alpha = dp with p vanishing on the boundary: every measurement is
        // zero up to quadrature error.
        let (_, fan) = disk_fan(8, 5);
        let p = |x: &Pt| (1.0 - x[0] * x[0] - x[1] * x[1]) * (0.7 * x[0] + 0.4 * x[1] * x[1]);
        let dp = |x: &Pt| {
            let h = 1e-6;
            let mut g = [Complex64::new(0.0, 0.0); 2];
            for k in 0..2 {
                let mut xp = *x;
                let mut xm = *x;
                xp[k] += h;
                xm[k] -= h;
                g[k] = Complex64::new((p(&xp) - p(&xm)) / (2.0 * h), 0.0);
            }
            g
        };
        let meas = forward_with(
            |_| Complex64::new(0.0, 0.0),
            dp,
            &fan,
            0.0,
            2e-3,
            ExecMode::Sequential,
        )
        .unwrap();
        for v in &meas.values {
            assert!(v.norm() < 1e-6, "nonzero measurement {v}");
        }
    }

    #[test]
    fn gaussian_on_diameter_matches_quadrature_oracle() {
        let chart = MetricChart::euclidean_disk(1.0);
        let geo = crate::geometry::integrate_geodesic(
            &chart,
            &pt(&[1.0, 0.0]),
            &pt(&[-1.0, 0.0]),
            &GeodesicOptions::default(),
        )
        .unwrap();
        let f = |x: &Pt| Complex64::new((-4.0 * (x[0] * x[0] + x[1] * x[1])).exp(), 0.0);
        let meas = forward_with(
            f,
            |_| [Complex64::new(0.0, 0.0); 2],
            &[geo],
            0.0,
            1e-3,
            ExecMode::Sequential,
        )
        .unwrap();
        // Independent adaptive-Simpson oracle for int_{-1}^{1} e^{-4 u^2} du.
        fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
            let m = 0.5 * (a + b);
            let coarse = (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b));
            let lm = 0.5 * (a + m);
            let rm = 0.5 * (m + b);
            let fine = (b - a) / 12.0
                * (f(a) + 4.0 * f(lm) + 2.0 * f(m) + 4.0 * f(rm) + f(b));
            if (fine - coarse).abs() < tol {
                fine + (fine - coarse) / 15.0
            } else {
                adaptive(f, a, m, tol / 2.0) + adaptive(f, m, b, tol / 2.0)
            }
        }
        let oracle = adaptive(&|u: f64| (-4.0 * u * u).exp(), -1.0, 1.0, 1e-12);
        assert_relative_eq!(meas.values[0].re, oracle, epsilon = 1e-8);
    }

    #[test]
    fn attenuation_monotone_for_positive_f() {
        let (_, fan) = disk_fan(5, 3);
        let f = |x: &Pt| Complex64::new(1.0 + 0.5 * x[0], 0.0);
        let mut prev: Option<Vec<f64>> = None;
        for lambda in [0.0, 0.3, 0.8] {
            let meas = forward_with(
                f,
                |_| [Complex64::new(0.0, 0.0); 2],
                &fan,
                lambda,
                2e-3,
                ExecMode::Sequential,
            )
            .unwrap();
            let vals: Vec<f64> = meas.values.iter().map(|v| v.re).collect();
            if let Some(p) = prev {
                for (a, b) in p.iter().zip(&vals) {
                    assert!(b < a, "attenuation must decrease measurements");
                }
            }
            prev = Some(vals);
        }
    }

    #[test]
    fn gauge_project_exact_form_and_constant_curl() {
        let chart = MetricChart::euclidean_disk(1.0);
        let grid = GridSpec::new(&[-1.1, -1.1], &[1.1, 1.1], &[161, 161]);
        // Exact form whose potential decays to ~1e-7 at the boundary.
        let alpha = SampledOneForm::from_fn(&chart, &grid, |x| {
            let w = (-(x[0] * x[0] + x[1] * x[1]) / 0.08).exp();
            let q = 0.4 + 0.3 * x[0];
            let dw = -2.0 / 0.08;
            vec![
                Complex64::new(w * (dw * x[0] * q + 0.3), 0.0),
                Complex64::new(w * dw * x[1] * q, 0.0),
            ]
        });
        let (curl, sol) = gauge_project(&alpha, GaugeOptions::default()).unwrap();
        let curl_max = curl.values.iter().map(|v| v.norm()).fold(0.0f64, f64::max);
        assert!(curl_max < 1e-3, "curl of exact form: {curl_max}");
        let sol_max = sol
            .components
            .iter()
            .flatten()
            .map(|v| v.norm())
            .fold(0.0f64, f64::max);
        assert!(sol_max < 1e-4, "solenoidal remainder: {sol_max}");

        // alpha = x2 dx1 has curl coefficient d1 a2 - d2 a1 = -1.
        let alpha2 = SampledOneForm::from_fn(&chart, &grid, |x| {
            vec![Complex64::new(x[1], 0.0), Complex64::new(0.0, 0.0)]
        });
        let (curl2, _) = gauge_project(&alpha2, GaugeOptions::default()).unwrap();
        for v in &curl2.values {
            assert_relative_eq!(v.re, -1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn gauge_project_idempotent() {
        let chart = MetricChart::euclidean_disk(1.0);
        let grid = GridSpec::new(&[-1.1, -1.1], &[1.1, 1.1], &[97, 97]);
        let alpha = SampledOneForm::from_fn(&chart, &grid, |x| {
            vec![
                Complex64::new((2.0 * x[1]).sin(), 0.1 * x[0]),
                Complex64::new(x[0] * x[1], 0.0),
            ]
        });
        let (_, sol1) = gauge_project(&alpha, GaugeOptions::default()).unwrap();
        let (_, sol2) = gauge_project(&sol1, GaugeOptions::default()).unwrap();
        let mut worst = 0.0f64;
        for k in 0..2 {
            for i in 0..grid.len() {
                worst = worst.max((sol1.components[k][i] - sol2.components[k][i]).norm());
            }
        }
        assert!(worst < 1e-8, "projection not idempotent: {worst}");
    }

    #[test]
    fn roundtrip_recovers_f() {
        let (_, fan) = disk_fan(20, 20);
        let fstar = |x: &Pt| {
            Complex64::new(
                (-3.0 * ((x[0] - 0.2).powi(2) + x[1] * x[1])).exp(),
                0.5 * (-4.0 * (x[0] * x[0] + (x[1] + 0.3).powi(2))).exp(),
            )
        };
        let meas = forward_with(
            fstar,
            |_| [Complex64::new(0.0, 0.0); 2],
            &fan,
            0.0,
            2e-3,
            ExecMode::Parallel,
        )
        .unwrap();
        let out_grid = GridSpec::new(&[-1.0, -1.0], &[1.0, 1.0], &[81, 81]);
        let basis = InversionBasis {
            order: 12,
            lo: [-1.05, -1.05],
            hi: [1.05, 1.05],
        };
        let res = invert(&meas, &out_grid, &basis, 1e-6, ExecMode::Parallel).unwrap();
        let chart = MetricChart::euclidean_disk(1.0);
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..out_grid.len() {
            let x = pt(&out_grid.node(i));
            if !chart.is_inside(&x) {
                continue;
            }
            let w = out_grid.quad_weight(i);
            num += (res.f_hat.values[i] - fstar(&x)).norm_sqr() * w;
            den += fstar(&x).norm_sqr() * w;
        }
        let rel = (num / den).sqrt();
        assert!(rel < 0.05, "relative f error {rel}");
    }

    #[test]
    fn zero_measurement_recovers_gauge_trivial_data() {
        let (_, fan) = disk_fan(12, 10);
        let meas = forward_with(
            |_| Complex64::new(0.0, 0.0),
            |_| [Complex64::new(0.0, 0.0); 2],
            &fan,
            0.0,
            2e-3,
            ExecMode::Sequential,
        )
        .unwrap();
        let out_grid = GridSpec::new(&[-1.0, -1.0], &[1.0, 1.0], &[41, 41]);
        let basis = InversionBasis {
            order: 8,
            lo: [-1.05, -1.05],
            hi: [1.05, 1.05],
        };
        let res = invert(&meas, &out_grid, &basis, 1e-6, ExecMode::Sequential).unwrap();
        let f_max = res
            .f_hat
            .values
            .iter()
            .map(|v| v.norm())
            .fold(0.0f64, f64::max);
        assert!(f_max < 1e-8, "f from zero data: {f_max}");
        assert!(res.curl_norm < 1e-8, "curl from zero data: {}", res.curl_norm);
    }

    #[test]
    fn roundtrip_recovers_curl_of_alpha() {
        let (_, fan) = disk_fan(20, 20);
        let astar = |x: &Pt| {
            [
                Complex64::new((-2.0 * (x[0] * x[0] + x[1] * x[1])).exp() * x[1], 0.0),
                Complex64::new(-0.6 * (-2.5 * ((x[0] + 0.1).powi(2) + x[1] * x[1])).exp(), 0.0),
            ]
        };
        let curl_star = |x: &Pt| {
            let h = 1e-5;
            let mut xp = *x;
            let mut xm = *x;
            xp[0] += h;
            xm[0] -= h;
            let d1a2 = (astar(&xp)[1] - astar(&xm)[1]) / (2.0 * h);
            let mut yp = *x;
            let mut ym = *x;
            yp[1] += h;
            ym[1] -= h;
            let d2a1 = (astar(&yp)[0] - astar(&ym)[0]) / (2.0 * h);
            d1a2 - d2a1
        };
        let meas = forward_with(
            |_| Complex64::new(0.0, 0.0),
            astar,
            &fan,
            0.0,
            2e-3,
            ExecMode::Parallel,
        )
        .unwrap();
        let out_grid = GridSpec::new(&[-1.0, -1.0], &[1.0, 1.0], &[81, 81]);
        let basis = InversionBasis {
            order: 12,
            lo: [-1.05, -1.05],
            hi: [1.05, 1.05],
        };
        let res = invert(&meas, &out_grid, &basis, 1e-6, ExecMode::Parallel).unwrap();
        let (curl_hat, _) = gauge_project(&res.alpha_hat, GaugeOptions::default()).unwrap();
        let chart = MetricChart::euclidean_disk(1.0);
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..out_grid.len() {
            let x = pt(&out_grid.node(i));
            if x.norm() > 0.95 {
                continue;
            }
            if !chart.is_inside(&x) {
                continue;
            }
            let w = out_grid.quad_weight(i);
            num += (curl_hat.values[i] - curl_star(&x)).norm_sqr() * w;
            den += curl_star(&x).norm_sqr() * w;
        }
        let rel = (num / den).sqrt();
        assert!(rel < 0.05, "relative curl error {rel}");
    }
}
