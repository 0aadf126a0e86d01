//! Semiclassical norms by quadrature with the metric volume, and the
//! certified H^{-1}_scl upper bound from a (smooth, divergence)
//! decomposition: |<w0 + d* w1, psi>| <= (||w0|| + ||w1||/h) ||psi||_{H1_scl}.

use serde::Serialize;

use crate::error::{CoreError, Result};
use crate::geometry::pt;

use super::ops::exterior_d;
use super::{SampledField, SampledOneForm, SemiclassicalParams};

#[derive(Debug, Clone, Serialize)]
pub struct SclNorms {
    pub l2: f64,
    pub h1_scl: f64,
}

fn volume_weight(u: &SampledField, i: usize) -> f64 {
    let x = pt(&u.grid.node(i));
    let det = u.chart.metric_full(&x).determinant().max(0.0);
    u.grid.quad_weight(i) * det.sqrt()
}

pub fn l2_norm(u: &SampledField) -> f64 {
    let mut acc = 0.0;
    for i in 0..u.grid.len() {
        acc += u.values[i].norm_sqr() * volume_weight(u, i);
    }
    acc.sqrt()
}

fn l2_norm_form(a: &SampledOneForm) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.grid.len() {
        let x = pt(&a.grid.node(i));
        let g = a.chart.metric_full(&x);
        let ginv = g.try_inverse().unwrap();
        let w = a.grid.quad_weight(i) * g.determinant().max(0.0).sqrt();
        let mut p = 0.0;
        for j in 0..a.chart.dim {
            for k in 0..a.chart.dim {
                p += (a.components[j][i] * a.components[k][i].conj()).re * ginv[(j, k)];
            }
        }
        acc += p * w;
    }
    acc.sqrt()
}

/// ||u||^2 + ||h grad u||^2, square-rooted.
pub fn h1_scl_norm(u: &SampledField, params: &SemiclassicalParams) -> Result<f64> {
    let du = exterior_d(u)?;
    let l2 = l2_norm(u);
    let dl2 = l2_norm_form(&du);
    Ok((l2 * l2 + (params.h() * dl2).powi(2)).sqrt())
}

/// Finite-difference equivalent of the H^2_scl norm:
/// ||u||^2 + ||h grad u||^2 + ||h^2 grad^2 u||^2, square-rooted. The Hessian
/// is the coordinate Hessian; on the flat slabs where this norm is used it
/// matches the invariant one.
pub fn h2_scl_norm(u: &SampledField, params: &SemiclassicalParams) -> Result<f64> {
    let h = params.h();
    let du = exterior_d(u)?;
    let mut acc = l2_norm(u).powi(2) + (h * l2_norm_form(&du)).powi(2);
    let h4 = h.powi(4);
    for j in 0..u.chart.dim {
        let dj = SampledField {
            chart: u.chart.clone(),
            grid: u.grid.clone(),
            values: du.components[j].clone(),
        };
        let ddj = exterior_d(&dj)?;
        for k in 0..u.chart.dim {
            let mut s = 0.0;
            for i in 0..u.grid.len() {
                s += ddj.components[k][i].norm_sqr() * volume_weight(u, i);
            }
            acc += h4 * s;
        }
    }
    Ok(acc.sqrt())
}

/// A residual tagged as w0 + d*(w1); the divergence part must be declared by
/// the caller, never differentiated numerically here.
#[derive(Debug, Clone)]
pub struct ResidualDecomposition {
    pub smooth: SampledField,
    pub divergence: Option<SampledOneForm>,
}

impl ResidualDecomposition {
    /// Certified upper bound for the H^{-1}_scl norm of w0 + d*(w1):
    /// ||w0||_{L2} + h^{-1} ||w1||_{L2}.
    pub fn h_minus1_scl_bound(&self, params: &SemiclassicalParams) -> f64 {
        let mut b = l2_norm(&self.smooth);
        if let Some(w1) = &self.divergence {
            b += l2_norm_form(w1) / params.h();
        }
        b
    }

    /// Duality pairing <w0 + d* w1, psi> evaluated by quadrature; used to
    /// cross-check the bound against brute-force quotients.
    pub fn pair_with(&self, psi: &SampledField) -> Result<num_complex::Complex64> {
        if psi.grid != self.smooth.grid {
            return Err(CoreError::Contract("mismatched grids in pairing".into()));
        }
        let grid = &psi.grid;
        let chart = &psi.chart;
        let mut acc = num_complex::Complex64::new(0.0, 0.0);
        for i in 0..grid.len() {
            acc += self.smooth.values[i] * psi.values[i].conj() * volume_weight(psi, i);
        }
        if let Some(w1) = &self.divergence {
            let dpsi = exterior_d(psi)?;
            for i in 0..grid.len() {
                let x = pt(&grid.node(i));
                let g = chart.metric_full(&x);
                let ginv = g.try_inverse().unwrap();
                let w = grid.quad_weight(i) * g.determinant().max(0.0).sqrt();
                let mut p = num_complex::Complex64::new(0.0, 0.0);
                for j in 0..chart.dim {
                    for k in 0..chart.dim {
                        p += w1.components[j][i] * dpsi.components[k][i].conj() * ginv[(j, k)];
                    }
                }
                acc += p * w;
            }
        }
        Ok(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::MetricChart;
    use crate::grid::GridSpec;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};

    #[test]
    fn zero_and_constant_norms() {
        let chart = MetricChart::flat_slab(&[0.0, 0.0], &[1.0, 1.0]);
        let grid = GridSpec::new(&[0.0, 0.0], &[1.0, 1.0], &[33, 33]);
        let params = SemiclassicalParams::new(0.1, 0.0).unwrap();
        let z = SampledField::zeros(&chart, &grid);
        assert_eq!(l2_norm(&z), 0.0);
        assert_eq!(h1_scl_norm(&z, &params).unwrap(), 0.0);
        let one = SampledField::from_fn(&chart, &grid, |_| Complex64::new(1.0, 0.0));
        assert!((l2_norm(&one) - 1.0).abs() < 1e-12);
        assert!((h1_scl_norm(&one, &params).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn certified_bound_dominates_duality_quotients() {
        let chart = MetricChart::flat_slab(&[-1.0, -1.0], &[1.0, 1.0]);
        let grid = GridSpec::new(&[-1.0, -1.0], &[1.0, 1.0], &[48, 48]);
        let params = SemiclassicalParams::new(0.07, 0.0).unwrap();
        let w0 = SampledField::from_fn(&chart, &grid, |x| {
            Complex64::new(x[0] * (1.0 - x[1] * x[1]), 0.3 * x[1])
        });
        let w1 = SampledOneForm::from_fn(&chart, &grid, |x| {
            vec![
                Complex64::new((1.5 * x[1]).sin(), 0.0),
                Complex64::new(0.0, 0.5 - 0.5 * x[0]),
            ]
        });
        let dec = ResidualDecomposition {
            smooth: w0,
            divergence: Some(w1),
        };
        let bound = dec.h_minus1_scl_bound(&params);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let (a, b, c, d) = (
                rng.gen_range(0.5..3.0),
                rng.gen_range(0.5..3.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let psi = SampledField::from_fn(&chart, &grid, |x| {
                Complex64::new(
                    (a * (x[0] - c)).cos() * (b * (x[1] - d)).sin(),
                    0.3 * (a * x[1]).sin(),
                )
            });
            let quotient = dec.pair_with(&psi).unwrap().norm()
                / h1_scl_norm(&psi, &params).unwrap();
            assert!(
                quotient <= bound * (1.0 + 1e-6),
                "quotient {quotient} exceeds bound {bound}"
            );
        }
    }
}
