//! Conformal reduction of the magnetic Schroedinger operator: replaces the
//! metric c (e + g0) by e + g0 at the price of a modified electric potential
//! q~ = c (q - c^{(n-2)/4} Lap_g(c^{-(n-2)/4})); the magnetic potential is
//! untouched.

use num_complex::Complex64;

use crate::error::{CoreError, Result};
use crate::geometry::{pt, MetricChart};

use super::ops::laplacian;
use super::{SampledField, SampledOneForm};

/// Returns (A, q~, unit-factor chart). The input chart's conformal factor c
/// must be bounded away from zero on the grid.
pub fn conformal_reduce(
    a: &SampledOneForm,
    q: &SampledField,
    chart: &MetricChart,
) -> Result<(SampledOneForm, SampledField, MetricChart)> {
    let grid = &q.grid;
    let n = chart.dim as f64;
    let expo = (n - 2.0) / 4.0;
    let mut c_vals = vec![0.0; grid.len()];
    for (i, cv) in c_vals.iter_mut().enumerate() {
        let x = pt(&grid.node(i));
        let c = chart.conformal_factor(&x);
        if !(c > 1e-10) {
            return Err(CoreError::Geometry(
                "conformal factor not bounded below".into(),
            ));
        }
        *cv = c;
    }
    // Lap_g of c^{-(n-2)/4} with the full metric g = c (e + g0).
    let cpow = SampledField {
        chart: chart.clone(),
        grid: grid.clone(),
        values: c_vals
            .iter()
            .map(|&c| Complex64::new(c.powf(-expo), 0.0))
            .collect(),
    };
    let lap_cpow = laplacian(&cpow)?;
    let mut q_tilde = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let c = c_vals[i];
        q_tilde.push((q.values[i] - lap_cpow.values[i] * c.powf(expo)) * c);
    }
    // Same base metric, unit conformal factor.
    let reduced = chart.clone().with_conformal_factor(|_| 1.0);
    let q_out = SampledField {
        chart: reduced.clone(),
        grid: grid.clone(),
        values: q_tilde,
    };
    let mut a_out = a.clone();
    a_out.chart = reduced.clone();
    Ok((a_out, q_out, reduced))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::ops::magnetic_schrodinger_apply;
    use crate::geometry::{MetricChart, Pt};
    use crate::grid::GridSpec;

    fn conformal_slab<C>(c: C) -> MetricChart
    where
        C: Fn(&Pt) -> f64 + Send + Sync + 'static,
    {
        MetricChart::flat_slab(&[-1.0, -1.0, -1.0], &[1.0, 1.0, 1.0]).with_conformal_factor(c)
    }

    #[test]
    fn identity_factor_is_noop() {
        let chart = conformal_slab(|_| 1.0);
        let grid = GridSpec::new(&[-1.0, -1.0, -1.0], &[1.0, 1.0, 1.0], &[9, 9, 9]);
        let q = SampledField::from_fn(&chart, &grid, |x| Complex64::new(x[0] * x[1], 0.3));
        let a = SampledOneForm::zeros(&chart, &grid);
        let (_, qt, _) = conformal_reduce(&a, &q, &chart).unwrap();
        for (a, b) in q.values.iter().zip(&qt.values) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn constant_factor_scales_q() {
        let chart = conformal_slab(|_| 2.5);
        let grid = GridSpec::new(&[-1.0, -1.0, -1.0], &[1.0, 1.0, 1.0], &[9, 9, 9]);
        let q = SampledField::from_fn(&chart, &grid, |x| Complex64::new(x[0], -x[2]));
        let a = SampledOneForm::zeros(&chart, &grid);
        let (_, qt, _) = conformal_reduce(&a, &q, &chart).unwrap();
        for (orig, red) in q.values.iter().zip(&qt.values) {
            assert!((red - orig * 2.5).norm() < 1e-10);
        }
    }

    #[test]
    fn operator_identity_on_smooth_test_function() {
        // c^{(n+2)/4} L_{g,A,q}(c^{-(n-2)/4} w) = L_{g~,A,q~} w, checked on
        // interior nodes of a modest 3D grid.
        let cfun = |x: &Pt| 1.0 + 0.3 * (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp();
        let chart = conformal_slab(cfun);
        let grid = GridSpec::new(&[-1.0, -1.0, -1.0], &[1.0, 1.0, 1.0], &[49, 49, 49]);
        let ndim = 3.0;
        let w = SampledField::from_fn(&chart, &grid, |x| {
            Complex64::new((1.3 * x[0]).cos() * (0.9 * x[1]).sin(), 0.5 * x[2])
        });
        let a = SampledOneForm::from_fn(&chart, &grid, |x| {
            vec![
                Complex64::new(0.2 * x[1], 0.0),
                Complex64::new(-0.1 * x[0], 0.0),
                Complex64::new(0.15, 0.0),
            ]
        });
        let q = SampledField::from_fn(&chart, &grid, |x| Complex64::new(0.4 * x[0], 0.1));
        let (a_red, q_red, reduced) = conformal_reduce(&a, &q, &chart).unwrap();

        // Left: c^{(n+2)/4} L_g(c^{-(n-2)/4} w).
        let cw = SampledField::from_fn(&chart, &grid, |x| {
            let c = cfun(x);
            Complex64::new((1.3 * x[0]).cos() * (0.9 * x[1]).sin(), 0.5 * x[2])
                * c.powf(-(ndim - 2.0) / 4.0)
        });
        let l_g = magnetic_schrodinger_apply(&cw, &a, &q).unwrap();
        // Right: L_{g~} w with the reduced chart.
        let w_red = SampledField {
            chart: reduced.clone(),
            grid: grid.clone(),
            values: w.values.clone(),
        };
        let l_red = magnetic_schrodinger_apply(&w_red, &a_red, &q_red).unwrap();

        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..grid.len() {
            if !grid.is_interior(i, 4) {
                continue;
            }
            let x = pt(&grid.node(i));
            let c = cfun(&x);
            let lhs = l_g.values[i] * c.powf((ndim + 2.0) / 4.0);
            num += (lhs - l_red.values[i]).norm_sqr();
            den += l_red.values[i].norm_sqr();
        }
        let rel = (num / den).sqrt();
        assert!(rel < 1e-4, "conformal identity relative error {rel}");
    }
}
