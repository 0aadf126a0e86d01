//! Differential operators: exterior derivative, codifferential, Laplacian,
//! the magnetic Schroedinger operator, and conjugated (expanded) variants.

use num_complex::Complex64;

use crate::error::{CoreError, Result};
use crate::geometry::pt;

use super::{SampledField, SampledOneForm, SemiclassicalParams};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

fn check_resolution(grid: &crate::grid::GridSpec) -> Result<()> {
    for (axis, &n) in grid.shape.iter().enumerate() {
        if n < 5 {
            return Err(CoreError::Resolution(format!(
                "axis {axis} has only {n} nodes; differencing needs at least 5"
            )));
        }
    }
    Ok(())
}

/// de Rham differential of a scalar field (4th-order stencils).
pub fn exterior_d(u: &SampledField) -> Result<SampledOneForm> {
    check_resolution(&u.grid)?;
    let mut components = Vec::with_capacity(u.chart.dim);
    for axis in 0..u.chart.dim {
        components.push(u.grid.deriv_axis(&u.values, axis)?);
    }
    Ok(SampledOneForm {
        chart: u.chart.clone(),
        grid: u.grid.clone(),
        components,
        boundary_tangential_zero: false,
    })
}

/// Codifferential d* v = -|g|^{-1/2} d_j (|g|^{1/2} g^{jk} v_k), with the
/// full (conformally scaled) metric of the chart.
pub fn codifferential(v: &SampledOneForm) -> Result<SampledField> {
    check_resolution(&v.grid)?;
    let grid = &v.grid;
    let chart = &v.chart;
    let dim = chart.dim;
    let n = grid.len();
    // w^j = |g|^{1/2} g^{jk} v_k per node.
    let mut w = vec![vec![ZERO; n]; dim];
    let mut inv_sqrt_det = vec![0.0; n];
    for i in 0..n {
        let x = pt(&grid.node(i));
        let g = chart.metric_full(&x);
        let det = g.determinant().max(1e-300);
        let sd = det.sqrt();
        inv_sqrt_det[i] = 1.0 / sd;
        let ginv = g.try_inverse().ok_or_else(|| {
            CoreError::Conditioning("metric inversion failed in codifferential".into())
        })?;
        for j in 0..dim {
            let mut acc = ZERO;
            for k in 0..dim {
                acc += v.components[k][i] * ginv[(j, k)];
            }
            w[j][i] = acc * sd;
        }
    }
    let mut out = vec![ZERO; n];
    for (j, wj) in w.iter().enumerate() {
        let d = grid.deriv_axis(wj, j)?;
        for i in 0..n {
            out[i] -= d[i] * inv_sqrt_det[i];
        }
    }
    Ok(SampledField {
        chart: chart.clone(),
        grid: grid.clone(),
        values: out,
    })
}

/// Laplace-Beltrami operator as -d* d on scalars.
pub fn laplacian(u: &SampledField) -> Result<SampledField> {
    let du = exterior_d(u)?;
    let mut out = codifferential(&du)?;
    for v in &mut out.values {
        *v = -*v;
    }
    Ok(out)
}

/// Pointwise metric pairing <a, b>_g of two one-forms (bilinear, no
/// conjugation), returned as nodal values.
fn form_pairing(a: &SampledOneForm, b: &SampledOneForm) -> Result<Vec<Complex64>> {
    if a.grid != b.grid {
        return Err(CoreError::Contract("mismatched grids in pairing".into()));
    }
    let grid = &a.grid;
    let chart = &a.chart;
    let dim = chart.dim;
    let mut out = vec![ZERO; grid.len()];
    for (i, slot) in out.iter_mut().enumerate() {
        let x = pt(&grid.node(i));
        let ginv = chart
            .metric_full(&x)
            .try_inverse()
            .ok_or_else(|| CoreError::Conditioning("metric inversion failed".into()))?;
        let mut acc = ZERO;
        for j in 0..dim {
            for k in 0..dim {
                acc += a.components[j][i] * b.components[k][i] * ginv[(j, k)];
            }
        }
        *slot = acc;
    }
    Ok(out)
}

fn scale_form(a: &SampledOneForm, u: &SampledField) -> SampledOneForm {
    let mut out = a.clone();
    for comp in &mut out.components {
        for (c, &uv) in comp.iter_mut().zip(&u.values) {
            *c *= uv;
        }
    }
    out
}

/// Magnetic Schroedinger operator
/// L u = -Lap u + i d*(A u) - i <A, du>_g + (<A, A>_g + q) u.
pub fn magnetic_schrodinger_apply(
    u: &SampledField,
    a: &SampledOneForm,
    q: &SampledField,
) -> Result<SampledField> {
    if u.grid != a.grid || u.grid != q.grid {
        return Err(CoreError::Contract(
            "field, potential and charge must share a grid".into(),
        ));
    }
    let lap = laplacian(u)?;
    let du = exterior_d(u)?;
    let dstar_au = codifferential(&scale_form(a, u))?;
    let a_du = form_pairing(a, &du)?;
    let a_a = form_pairing(a, a)?;
    let mut values = Vec::with_capacity(u.values.len());
    for i in 0..u.values.len() {
        values.push(
            -lap.values[i] + I * dstar_au.values[i] - I * a_du[i]
                + (a_a[i] + q.values[i]) * u.values[i],
        );
    }
    Ok(SampledField {
        chart: u.chart.clone(),
        grid: u.grid.clone(),
        values,
    })
}

/// Conjugation weight for [`conjugated_apply`]; names the function rho such
/// that the operator computed is e^{rho/h} h^2 L e^{-rho/h}, in expanded form
/// (the exponential weights are never evaluated).
#[derive(Debug, Clone, Copy)]
pub enum ConjugationWeight {
    /// rho = sign * h * s * x1, i.e. the e^{sign * s x1} conjugation.
    ComplexS { sign: f64 },
    /// rho = x1 + (h / 2 eps) x1^2, the convexified real weight.
    RealConvexified { epsilon: f64 },
    /// rho = x1 (no convexification).
    RealLinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scaling {
    /// Return e^{rho/h} h^2 L e^{-rho/h} u.
    H2,
    /// Return e^{rho/h} L e^{-rho/h} u (the h^2-scaled result divided by h^2).
    Unscaled,
}

/// Expanded conjugated magnetic Schroedinger operator
///
/// e^{rho/h} h^2 L_{g,A,q} e^{-rho/h} u =
///   h^2 [ -Lap u + i d*(Au) - i<A,du> + (<A,A>+q) u ]
///   + h (Lap rho) u + 2 h <d rho, du> - <d rho, d rho> u + 2 i h <A, d rho> u
///
/// with all pairings extended bilinearly to complex covectors.
pub fn conjugated_apply(
    u: &SampledField,
    a: &SampledOneForm,
    q: &SampledField,
    params: &SemiclassicalParams,
    weight: ConjugationWeight,
    scaling: Scaling,
) -> Result<SampledField> {
    let h = params.h();
    let grid = &u.grid;
    let chart = &u.chart;
    let n = grid.len();

    // rho factor along dx1: rho = f(x1), d rho = f'(x1) dx1.
    // Lap rho = f'(x1) Lap x1 + f''(x1) |d x1|^2.
    let (fp, fpp): (Vec<Complex64>, Vec<Complex64>) = match weight {
        ConjugationWeight::ComplexS { sign } => {
            let c = params.s() * h * sign;
            (vec![c; n], vec![ZERO; n])
        }
        ConjugationWeight::RealConvexified { epsilon } => {
            if !(epsilon > 0.0) {
                return Err(CoreError::Parameter("epsilon must be positive".into()));
            }
            let mut fp = Vec::with_capacity(n);
            for i in 0..n {
                let x1 = grid.node(i)[0];
                fp.push(Complex64::new(1.0 + (h / epsilon) * x1, 0.0));
            }
            (fp, vec![Complex64::new(h / epsilon, 0.0); n])
        }
        ConjugationWeight::RealLinear => (
            vec![Complex64::new(1.0, 0.0); n],
            vec![ZERO; n],
        ),
    };

    // Geometry of the x1 coordinate: Lap x1 = -d*(dx1).
    let dx1 = {
        let mut f = SampledOneForm::zeros(chart, grid);
        f.components[0] = vec![Complex64::new(1.0, 0.0); n];
        f
    };
    let lap_x1 = {
        let mut v = codifferential(&dx1)?;
        for w in &mut v.values {
            *w = -*w;
        }
        v
    };

    let du = exterior_d(u)?;
    let base = magnetic_schrodinger_apply(u, a, q)?;

    let mut values = Vec::with_capacity(n);
    for i in 0..n {
        let x = pt(&grid.node(i));
        let ginv = chart
            .metric_full(&x)
            .try_inverse()
            .ok_or_else(|| CoreError::Conditioning("metric inversion failed".into()))?;
        let mut g1_du = ZERO;
        let mut g1_a = ZERO;
        for k in 0..chart.dim {
            g1_du += du.components[k][i] * ginv[(0, k)];
            g1_a += a.components[k][i] * ginv[(0, k)];
        }
        let drho_du = fp[i] * g1_du;
        let drho_sq = fp[i] * fp[i] * ginv[(0, 0)];
        let lap_rho = fp[i] * lap_x1.values[i] + fpp[i] * ginv[(0, 0)];
        let a_drho = fp[i] * g1_a;
        let v = base.values[i] * h * h + lap_rho * u.values[i] * h + drho_du * 2.0 * h
            - drho_sq * u.values[i]
            + I * a_drho * u.values[i] * 2.0 * h;
        values.push(match scaling {
            Scaling::H2 => v,
            Scaling::Unscaled => v / (h * h),
        });
    }
    Ok(SampledField {
        chart: chart.clone(),
        grid: grid.clone(),
        values,
    })
}

/// The self-adjoint split P = A + iB of the real-weight conjugated Laplacian
/// (no magnetic terms): A u = -h^2 Lap u - |grad rho|^2 u and
/// B u = -2 i <grad rho, h grad u> - i h (Lap rho) u.
pub fn conjugated_real_parts(
    u: &SampledField,
    params: &SemiclassicalParams,
    weight: ConjugationWeight,
) -> Result<(SampledField, SampledField)> {
    let h = params.h();
    let grid = &u.grid;
    let chart = &u.chart;
    let n = grid.len();
    let (fp, fpp): (Vec<f64>, Vec<f64>) = match weight {
        ConjugationWeight::RealConvexified { epsilon } => {
            let mut a = Vec::with_capacity(n);
            for i in 0..n {
                let x1 = grid.node(i)[0];
                a.push(1.0 + (h / epsilon) * x1);
            }
            (a, vec![h / epsilon; n])
        }
        ConjugationWeight::RealLinear => (vec![1.0; n], vec![0.0; n]),
        ConjugationWeight::ComplexS { .. } => {
            return Err(CoreError::Contract(
                "real-part split needs a real weight".into(),
            ));
        }
    };
    let dx1 = {
        let mut f = SampledOneForm::zeros(chart, grid);
        f.components[0] = vec![Complex64::new(1.0, 0.0); n];
        f
    };
    let g11 = form_pairing(&dx1, &dx1)?;
    let lap_x1 = {
        let mut v = codifferential(&dx1)?;
        for w in &mut v.values {
            *w = -*w;
        }
        v
    };
    let lap = laplacian(u)?;
    let du = exterior_d(u)?;
    let mut av = Vec::with_capacity(n);
    let mut bv = Vec::with_capacity(n);
    for i in 0..n {
        let grad_sq = fp[i] * fp[i] * g11[i].re;
        av.push(-lap.values[i] * h * h - u.values[i] * grad_sq);
        let lap_rho = fp[i] * lap_x1.values[i].re + fpp[i] * g11[i].re;
        let drho_du = fp[i] * g11[i].re * du.components[0][i];
        bv.push(-I * (drho_du * 2.0 * h + u.values[i] * h * lap_rho));
    }
    Ok((
        SampledField {
            chart: chart.clone(),
            grid: grid.clone(),
            values: av,
        },
        SampledField {
            chart: chart.clone(),
            grid: grid.clone(),
            values: bv,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Mat3, MetricChart, Pt};
    use crate::grid::GridSpec;
    use approx::assert_relative_eq;

    fn flat_chart_2d() -> MetricChart {
        MetricChart::flat_slab(&[-1.0, -1.0], &[1.0, 1.0])
    }

    #[test]
    fn d_of_constant_and_linear() {
        let chart = flat_chart_2d();
        let grid = GridSpec::new(&[-1.0, -1.0], &[1.0, 1.0], &[17, 17]);
        let one = SampledField::from_fn(&chart, &grid, |_| Complex64::new(1.0, 0.0));
        let d1 = exterior_d(&one).unwrap();
        assert!(d1.components.iter().flatten().all(|c| c.norm() < 1e-12));
        let x1 = SampledField::from_fn(&chart, &grid, |x| Complex64::new(x[0], 0.0));
        let dx1 = exterior_d(&x1).unwrap();
        for i in 0..grid.len() {
            assert_relative_eq!(dx1.components[0][i].re, 1.0, epsilon = 1e-10);
            assert!(dx1.components[1][i].norm() < 1e-10);
        }
    }

    #[test]
    fn d_matches_analytic_gradient() {
        let chart = flat_chart_2d();
        let grid = GridSpec::new(&[-1.0, -1.0], &[1.0, 1.0], &[128, 128]);
        let u = SampledField::from_fn(&chart, &grid, |x| {
            Complex64::new(x[0].sin() * x[1].cos(), 0.0)
        });
        let du = exterior_d(&u).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..grid.len() {
            let x = grid.node(i);
            worst = worst
                .max((du.components[0][i].re - x[0].cos() * x[1].cos()).abs())
                .max((du.components[1][i].re + x[0].sin() * x[1].sin()).abs());
        }
        assert!(worst < 1e-6, "gradient error {worst}");
    }

    #[test]
    fn codifferential_euclidean() {
        let chart = flat_chart_2d();
        let grid = GridSpec::new(&[-1.0, -1.0], &[1.0, 1.0], &[33, 33]);
        let v = SampledOneForm::from_fn(&chart, &grid, |x| {
            vec![Complex64::new(x[0], 0.0), ZERO]
        });
        let dstar = codifferential(&v).unwrap();
        for val in &dstar.values {
            assert_relative_eq!(val.re, -1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn codifferential_polar_oracle() {
        // Metric dr^2 + r^2 dtheta^2: |g|^{1/2} = r, and d*(dr) = -1/r by
        // the displayed formula.
        let chart = MetricChart::builder(2, "polar")
            .metric(|x: &Pt| {
                let mut m = Mat3::identity();
                m[(1, 1)] = x[0] * x[0];
                m
            })
            .valid_box(&[0.2, -0.5], &[3.0, 0.5])
            .build();
        let grid = GridSpec::new(&[0.5, -0.3], &[2.5, 0.3], &[65, 17]);
        let v = SampledOneForm::from_fn(&chart, &grid, |_| {
            vec![Complex64::new(1.0, 0.0), ZERO]
        });
        let dstar = codifferential(&v).unwrap();
        for i in 0..grid.len() {
            let r = grid.node(i)[0];
            assert_relative_eq!(dstar.values[i].re, -1.0 / r, epsilon = 1e-6);
        }
    }

    #[test]
    fn adjointness_of_d_and_dstar() {
        // (du, v) - (u, d* v) vanishes for compactly supported smooth u, v.
        let chart = flat_chart_2d();
        let grid = GridSpec::new(&[-1.0, -1.0], &[1.0, 1.0], &[96, 96]);
        let bump = |x: &Pt, cx: f64, cy: f64| {
            let r2 = ((x[0] - cx).powi(2) + (x[1] - cy).powi(2)) / 0.09;
            if r2 < 1.0 {
                (-1.0 / (1.0 - r2)).exp()
            } else {
                0.0
            }
        };
        let u = SampledField::from_fn(&chart, &grid, |x| Complex64::new(bump(x, 0.1, 0.0), 0.0));
        let v = SampledOneForm::from_fn(&chart, &grid, |x| {
            vec![
                Complex64::new(bump(x, -0.1, 0.1), 0.0),
                Complex64::new(0.5 * bump(x, 0.0, -0.15), 0.2 * bump(x, 0.1, 0.1)),
            ]
        });
        let du = exterior_d(&u).unwrap();
        let dstar_v = codifferential(&v).unwrap();
        let mut p1 = ZERO;
        let mut p2 = ZERO;
        for i in 0..grid.len() {
            let w = grid.quad_weight(i);
            // Flat metric: plain dot of components against conjugates.
            for k in 0..2 {
                p1 += du.components[k][i] * v.components[k][i].conj() * w;
            }
            p2 += u.values[i] * dstar_v.values[i].conj() * w;
        }
        assert!((p1 - p2).norm() < 1e-5, "pairing gap {}", (p1 - p2).norm());
    }

    #[test]
    fn pure_laplacian_on_x1_squared() {
        let chart = flat_chart_2d();
        let grid = GridSpec::new(&[-1.0, -1.0], &[1.0, 1.0], &[33, 33]);
        let u = SampledField::from_fn(&chart, &grid, |x| Complex64::new(x[0] * x[0], 0.0));
        let a = SampledOneForm::zeros(&chart, &grid);
        let q = SampledField::zeros(&chart, &grid);
        let lu = magnetic_schrodinger_apply(&u, &a, &q).unwrap();
        for v in &lu.values {
            assert_relative_eq!(v.re, -2.0, epsilon = 1e-8);
        }
        // Zeroth order: A = 0, q = c, u = 1 gives c.
        let one = SampledField::from_fn(&chart, &grid, |_| Complex64::new(1.0, 0.0));
        let qc = SampledField::from_fn(&chart, &grid, |_| Complex64::new(0.7, -0.3));
        let lq = magnetic_schrodinger_apply(&one, &a, &qc).unwrap();
        for v in &lq.values {
            assert!((v - Complex64::new(0.7, -0.3)).norm() < 1e-10);
        }
    }

    #[test]
    fn gauge_covariance_identity() {
        // e^{-i phi} L_{g,A,q} e^{i phi} = L_{g, A + d phi, q} on interior
        // nodes, within discretization tolerance.
        let chart = flat_chart_2d();
        let grid = GridSpec::new(&[-1.0, -1.0], &[1.0, 1.0], &[96, 96]);
        let phi = |x: &Pt| 0.4 * (1.0 - x[0] * x[0]) * (1.0 - x[1] * x[1]) * (x[0] + 0.3 * x[1]);
        let dphi = |x: &Pt| {
            let h = 1e-6;
            let mut g = [0.0; 2];
            for k in 0..2 {
                let mut xp = *x;
                let mut xm = *x;
                xp[k] += h;
                xm[k] -= h;
                g[k] = (phi(&xp) - phi(&xm)) / (2.0 * h);
            }
            g
        };
        let u = SampledField::from_fn(&chart, &grid, |x| {
            Complex64::new((1.2 * x[0]).cos(), (0.8 * x[1]).sin())
        });
        let a = SampledOneForm::from_fn(&chart, &grid, |x| {
            vec![
                Complex64::new(0.3 * x[1], 0.0),
                Complex64::new(-0.2 * x[0], 0.1),
            ]
        });
        let q = SampledField::from_fn(&chart, &grid, |x| Complex64::new(0.5 * x[0], 0.2));
        // Left side: e^{-i phi} L_A (e^{i phi} u).
        let e_iphi_u = SampledField::from_fn(&chart, &grid, |x| {
            Complex64::new((1.2 * x[0]).cos(), (0.8 * x[1]).sin())
                * (I * Complex64::new(phi(x), 0.0)).exp()
        });
        let lhs = magnetic_schrodinger_apply(&e_iphi_u, &a, &q).unwrap();
        // Right side: L_{A + d phi} u.
        let a_shift = SampledOneForm::from_fn(&chart, &grid, |x| {
            let g = dphi(x);
            vec![
                Complex64::new(0.3 * x[1] + g[0], 0.0),
                Complex64::new(-0.2 * x[0] + g[1], 0.1),
            ]
        });
        let rhs = magnetic_schrodinger_apply(&u, &a_shift, &q).unwrap();
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        for i in 0..grid.len() {
            if !grid.is_interior(i, 3) {
                continue;
            }
            let x = grid.node(i);
            let ph = (I * Complex64::new(phi(&pt(&x)), 0.0)).exp();
            let l = lhs.values[i] / ph;
            num += (l - rhs.values[i]).norm_sqr();
            den += rhs.values[i].norm_sqr();
        }
        let rel = (num / den).sqrt();
        assert!(rel < 1e-5, "gauge covariance relative error {rel}");
    }

    #[test]
    fn conjugated_on_constants_and_linear() {
        let chart = MetricChart::flat_slab(&[-1.0, -1.0, -1.0], &[1.0, 1.0, 1.0]);
        let grid = GridSpec::new(&[-1.0, -1.0, -1.0], &[1.0, 1.0, 1.0], &[17, 9, 9]);
        let params = SemiclassicalParams::new(0.2, 1.5).unwrap();
        let s = params.s();
        let a = SampledOneForm::zeros(&chart, &grid);
        let q = SampledField::zeros(&chart, &grid);
        let one = SampledField::from_fn(&chart, &grid, |_| Complex64::new(1.0, 0.0));
        let h2 = conjugated_apply(
            &one,
            &a,
            &q,
            &params,
            ConjugationWeight::ComplexS { sign: 1.0 },
            Scaling::H2,
        )
        .unwrap();
        // Constants kill every derivative term: result is -(h s)^2 = -(1 + i h lambda)^2.
        let expect = -(s * params.h()) * (s * params.h());
        for v in &h2.values {
            assert!((v - expect).norm() < 1e-9, "{v} vs {expect}");
        }
        let x1 = SampledField::from_fn(&chart, &grid, |x| Complex64::new(x[0], 0.0));
        let un = conjugated_apply(
            &x1,
            &a,
            &q,
            &params,
            ConjugationWeight::ComplexS { sign: 1.0 },
            Scaling::Unscaled,
        )
        .unwrap();
        for i in 0..grid.len() {
            let x = grid.node(i)[0];
            let expect = -s * s * x + 2.0 * s;
            assert!((un.values[i] - expect).norm() < 1e-7);
        }
    }

    #[test]
    fn conjugated_matches_direct_exponential_at_moderate_mu() {
        // mu = 4 is stable for direct multiplication by e^{+-s x1}; compare
        // on interior nodes of a grid fine along x1.
        let chart = flat_chart_2d();
        let grid = GridSpec::new(&[-0.25, -0.5], &[0.25, 0.5], &[801, 9]);
        let params = SemiclassicalParams::new(0.25, 0.7).unwrap();
        let s = params.s();
        let u = SampledField::from_fn(&chart, &grid, |x| {
            Complex64::new((2.0 * x[0]).cos() * (1.0 + 0.3 * x[1]), 0.4 * x[0])
        });
        let a = SampledOneForm::from_fn(&chart, &grid, |x| {
            vec![
                Complex64::new(0.2 * x[1] + 0.1, 0.0),
                Complex64::new(0.3 * x[0], 0.05),
            ]
        });
        let q = SampledField::from_fn(&chart, &grid, |x| Complex64::new(0.3 * x[1], 0.1));
        let expanded = conjugated_apply(
            &u,
            &a,
            &q,
            &params,
            ConjugationWeight::ComplexS { sign: 1.0 },
            Scaling::Unscaled,
        )
        .unwrap();
        let e_minus = SampledField::from_fn(&chart, &grid, |x| {
            Complex64::new((2.0 * x[0]).cos() * (1.0 + 0.3 * x[1]), 0.4 * x[0])
                * (-s * x[0]).exp()
        });
        let l_direct = magnetic_schrodinger_apply(&e_minus, &a, &q).unwrap();
        let mut worst = 0.0f64;
        for i in 0..grid.len() {
            if !grid.is_interior(i, 3) {
                continue;
            }
            let x1 = grid.node(i)[0];
            let direct = l_direct.values[i] * (s * x1).exp();
            worst = worst.max((direct - expanded.values[i]).norm());
        }
        assert!(worst < 1e-8, "expanded vs direct mismatch {worst}");
    }
}
