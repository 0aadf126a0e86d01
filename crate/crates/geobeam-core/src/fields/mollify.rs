//! Mollification by a compactly supported bump kernel (1 - |x/tau|^2)^4,
//! discretely normalized so constants are reproduced exactly; data is
//! extended by zero outside the grid.

use num_complex::Complex64;

use crate::error::{CoreError, Result};
use crate::grid::GridSpec;
use crate::par::{fill_indexed, ExecMode};

use super::{SampledField, SampledOneForm};

struct Stencil {
    offsets: Vec<(Vec<isize>, f64)>,
}

fn build_stencil(grid: &GridSpec, tau: f64) -> Result<Stencil> {
    let dim = grid.dim();
    let mut radii = Vec::with_capacity(dim);
    for axis in 0..dim {
        let r = tau / grid.steps[axis];
        if r < 2.0 {
            return Err(CoreError::Resolution(format!(
                "smoothing length {tau} is below two grid steps on axis {axis}"
            )));
        }
        radii.push(r.floor() as isize);
    }
    let mut offsets = Vec::new();
    let mut idx = vec![-radii[0]; dim];
    let mut total = 0.0;
    'outer: loop {
        let mut r2 = 0.0;
        for (axis, &o) in idx.iter().enumerate() {
            let d = o as f64 * grid.steps[axis] / tau;
            r2 += d * d;
        }
        if r2 < 1.0 {
            let w = (1.0 - r2).powi(4);
            total += w;
            offsets.push((idx.clone(), w));
        }
        // Odometer over the offset box.
        for axis in (0..dim).rev() {
            idx[axis] += 1;
            if idx[axis] <= radii[axis] {
                continue 'outer;
            }
            idx[axis] = -radii[axis];
        }
        break;
    }
    for (_, w) in &mut offsets {
        *w /= total;
    }
    Ok(Stencil { offsets })
}

fn convolve(
    grid: &GridSpec,
    values: &[Complex64],
    stencil: &Stencil,
    mode: ExecMode,
) -> Vec<Complex64> {
    let dim = grid.dim();
    let mut out = vec![Complex64::new(0.0, 0.0); values.len()];
    fill_indexed(mode, &mut out, |flat| {
        let center = grid.multi_index(flat);
        let mut acc = Complex64::new(0.0, 0.0);
        'offsets: for (off, w) in &stencil.offsets {
            let mut src = vec![0usize; dim];
            for axis in 0..dim {
                let j = center[axis] as isize + off[axis];
                let n = grid.shape[axis] as isize;
                if grid.periodic[axis] {
                    src[axis] = j.rem_euclid(n) as usize;
                } else if j < 0 || j >= n {
                    continue 'offsets; // zero extension
                } else {
                    src[axis] = j as usize;
                }
            }
            acc += values[grid.flat_index(&src)] * *w;
        }
        acc
    });
    out
}

pub fn mollify_field(u: &SampledField, tau: f64, mode: ExecMode) -> Result<SampledField> {
    let stencil = build_stencil(&u.grid, tau)?;
    Ok(SampledField {
        chart: u.chart.clone(),
        grid: u.grid.clone(),
        values: convolve(&u.grid, &u.values, &stencil, mode),
    })
}

/// Componentwise mollification of a 1-form at smoothing length `tau`.
pub fn mollify_one_form(a: &SampledOneForm, tau: f64, mode: ExecMode) -> Result<SampledOneForm> {
    let stencil = build_stencil(&a.grid, tau)?;
    let components = a
        .components
        .iter()
        .map(|c| convolve(&a.grid, c, &stencil, mode))
        .collect();
    Ok(SampledOneForm {
        chart: a.chart.clone(),
        grid: a.grid.clone(),
        components,
        boundary_tangential_zero: a.boundary_tangential_zero,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::MetricChart;

    #[test]
    fn constant_region_is_fixed_point() {
        let chart = MetricChart::flat_slab(&[-1.0, -1.0], &[1.0, 1.0]);
        let grid = GridSpec::new(&[-1.0, -1.0], &[1.0, 1.0], &[81, 81]);
        let u = SampledField::from_fn(&chart, &grid, |x| {
            if x[0].abs() < 0.6 && x[1].abs() < 0.6 {
                Complex64::new(2.5, -1.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let tau = 0.15;
        let m = mollify_field(&u, tau, ExecMode::Sequential).unwrap();
        for i in 0..grid.len() {
            let x = grid.node(i);
            if x[0].abs() < 0.6 - tau - 1e-9 && x[1].abs() < 0.6 - tau - 1e-9 {
                assert!(
                    (m.values[i] - Complex64::new(2.5, -1.0)).norm() < 1e-10,
                    "interior value changed at {x:?}"
                );
            }
        }
    }

    #[test]
    fn rejects_subgrid_tau() {
        let chart = MetricChart::flat_slab(&[-1.0, -1.0], &[1.0, 1.0]);
        let grid = GridSpec::new(&[-1.0, -1.0], &[1.0, 1.0], &[21, 21]);
        let u = SampledField::zeros(&chart, &grid);
        assert!(mollify_field(&u, 0.05, ExecMode::Sequential).is_err());
    }

    #[test]
    fn lipschitz_kink_rates() {
        // tau * sup |grad A_tau| and tau^2 * sup |Lap A_tau| stay bounded
        // over a decreasing tau sweep for a Lipschitz kink.
        let chart = MetricChart::flat_slab(&[-1.0, -1.0], &[1.0, 1.0]);
        let grid = GridSpec::new(&[-1.0, -1.0], &[1.0, 1.0], &[257, 257]);
        let a = SampledOneForm::from_fn(&chart, &grid, |x| {
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            vec![
                Complex64::new((0.5 - r).max(0.0), 0.0),
                Complex64::new(0.0, 0.0),
            ]
        });
        let mut grad_products = Vec::new();
        let mut lap_products = Vec::new();
        for &tau in &[0.1, 0.05, 0.025] {
            let at = mollify_one_form(&a, tau, ExecMode::Parallel).unwrap();
            let d0 = grid.deriv_axis(&at.components[0], 0).unwrap();
            let d1 = grid.deriv_axis(&at.components[0], 1).unwrap();
            let sup_grad = d0
                .iter()
                .zip(&d1)
                .map(|(a, b)| (a.norm_sqr() + b.norm_sqr()).sqrt())
                .fold(0.0f64, f64::max);
            let dd0 = grid.deriv_axis(&d0, 0).unwrap();
            let dd1 = grid.deriv_axis(&d1, 1).unwrap();
            let sup_lap = dd0
                .iter()
                .zip(&dd1)
                .map(|(a, b)| (a + b).norm())
                .fold(0.0f64, f64::max);
            grad_products.push(tau * sup_grad);
            lap_products.push(tau * tau * sup_lap);
        }
        // Lipschitz data: gradient sup is O(1), so tau * sup is bounded by
        // its largest-tau value up to a small factor; same for the Laplacian
        // with one extra tau power.
        let g0 = grad_products[0];
        let l0 = lap_products[0];
        for (g, l) in grad_products.iter().zip(&lap_products) {
            assert!(*g <= 2.0 * g0.max(1e-12), "tau*grad grew: {grad_products:?}");
            assert!(*l <= 2.0 * l0.max(1e-12), "tau^2*lap grew: {lap_products:?}");
        }
    }

    #[test]
    fn l2_distance_decreases_to_zero() {
        let chart = MetricChart::flat_slab(&[-1.0, -1.0], &[1.0, 1.0]);
        let grid = GridSpec::new(&[-1.0, -1.0], &[1.0, 1.0], &[257, 257]);
        let a = SampledOneForm::from_fn(&chart, &grid, |x| {
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            vec![
                Complex64::new((0.5 - r).max(0.0), 0.0),
                Complex64::new(0.3 * (0.4 - x[0].abs()).max(0.0), 0.0),
            ]
        });
        let mut dists = Vec::new();
        for &tau in &[0.2, 0.1, 0.05, 0.025] {
            let at = mollify_one_form(&a, tau, ExecMode::Parallel).unwrap();
            let mut d2 = 0.0;
            for k in 0..2 {
                for i in 0..grid.len() {
                    d2 += (at.components[k][i] - a.components[k][i]).norm_sqr()
                        * grid.quad_weight(i);
                }
            }
            dists.push(d2.sqrt());
        }
        for w in dists.windows(2) {
            assert!(w[1] < w[0], "L2 distance not decreasing: {dists:?}");
        }
        // Lipschitz modulus: ||A - A_tau|| = O(tau).
        assert!(dists[3] < 0.6 * dists[1], "rate too slow: {dists:?}");
    }
}
