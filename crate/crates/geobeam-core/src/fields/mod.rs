//! Sampled complex scalar fields and 1-forms on chart grids, differential
//! operators, the magnetic Schroedinger operator and its conjugations,
//! mollification, conformal reduction and semiclassical norms.

pub mod conformal;
pub mod mollify;
pub mod norms;
pub mod ops;

use num_complex::Complex64;

use crate::error::{CoreError, Result};
use crate::geometry::{pt, MetricChart, Pt};
use crate::grid::GridSpec;

pub use conformal::conformal_reduce;
pub use mollify::{mollify_field, mollify_one_form};
pub use norms::{h1_scl_norm, h2_scl_norm, l2_norm, ResidualDecomposition, SclNorms};
pub use ops::{
    codifferential, conjugated_apply, conjugated_real_parts, exterior_d, laplacian,
    magnetic_schrodinger_apply, ConjugationWeight, Scaling,
};

/// Complex scalar samples on a structured grid over a chart.
#[derive(Debug, Clone)]
pub struct SampledField {
    pub chart: MetricChart,
    pub grid: GridSpec,
    pub values: Vec<Complex64>,
}

impl SampledField {
    pub fn from_fn<F>(chart: &MetricChart, grid: &GridSpec, f: F) -> Self
    where
        F: Fn(&Pt) -> Complex64,
    {
        let values = (0..grid.len()).map(|i| f(&pt(&grid.node(i)))).collect();
        Self {
            chart: chart.clone(),
            grid: grid.clone(),
            values,
        }
    }

    pub fn zeros(chart: &MetricChart, grid: &GridSpec) -> Self {
        Self {
            chart: chart.clone(),
            grid: grid.clone(),
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn eval(&self, x: &Pt) -> Complex64 {
        let coords: Vec<f64> = (0..self.grid.dim()).map(|k| x[k]).collect();
        self.grid.interp(&self.values, &coords)
    }

    pub fn assert_finite(&self) -> Result<()> {
        if self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
            Ok(())
        } else {
            Err(CoreError::Contract("field contains NaN/Inf".into()))
        }
    }

    pub fn map<F>(&self, f: F) -> Self
    where
        F: Fn(Complex64) -> Complex64,
    {
        Self {
            chart: self.chart.clone(),
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip<F>(&self, other: &Self, f: F) -> Result<Self>
    where
        F: Fn(Complex64, Complex64) -> Complex64,
    {
        if self.grid != other.grid {
            return Err(CoreError::Contract("mismatched grids".into()));
        }
        Ok(Self {
            chart: self.chart.clone(),
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }
}

/// Complex covector samples (chart-coordinate components) on a grid.
#[derive(Debug, Clone)]
pub struct SampledOneForm {
    pub chart: MetricChart,
    pub grid: GridSpec,
    /// One component vector per chart coordinate.
    pub components: Vec<Vec<Complex64>>,
    /// Declared tangential-trace-zero at the boundary (checked on demand).
    pub boundary_tangential_zero: bool,
}

impl SampledOneForm {
    pub fn from_fn<F>(chart: &MetricChart, grid: &GridSpec, f: F) -> Self
    where
        F: Fn(&Pt) -> Vec<Complex64>,
    {
        let dim = chart.dim;
        let mut components = vec![vec![Complex64::new(0.0, 0.0); grid.len()]; dim];
        for i in 0..grid.len() {
            let vals = f(&pt(&grid.node(i)));
            debug_assert_eq!(vals.len(), dim);
            for (k, v) in vals.into_iter().enumerate() {
                components[k][i] = v;
            }
        }
        Self {
            chart: chart.clone(),
            grid: grid.clone(),
            components,
            boundary_tangential_zero: false,
        }
    }

    pub fn zeros(chart: &MetricChart, grid: &GridSpec) -> Self {
        Self {
            chart: chart.clone(),
            grid: grid.clone(),
            components: vec![vec![Complex64::new(0.0, 0.0); grid.len()]; chart.dim],
            boundary_tangential_zero: false,
        }
    }

    /// Covector components at a point, by interpolation.
    pub fn eval(&self, x: &Pt) -> Vec<Complex64> {
        let coords: Vec<f64> = (0..self.grid.dim()).map(|k| x[k]).collect();
        self.components
            .iter()
            .map(|c| self.grid.interp(c, &coords))
            .collect()
    }

    /// Duality pairing with a tangent vector at a point.
    pub fn pair(&self, x: &Pt, v: &Pt) -> Complex64 {
        let comps = self.eval(x);
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, c) in comps.iter().enumerate() {
            acc += c * v[k];
        }
        acc
    }

    pub fn assert_finite(&self) -> Result<()> {
        for c in &self.components {
            if !c.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
                return Err(CoreError::Contract("one-form contains NaN/Inf".into()));
            }
        }
        Ok(())
    }

    /// Max |tangential pullback| over boundary samples; only meaningful for
    /// charts with a parametrized boundary.
    pub fn boundary_tangential_sup(&self, n_samples: usize) -> Result<f64> {
        let mut sup: f64 = 0.0;
        let dth = std::f64::consts::TAU / n_samples as f64;
        for i in 0..n_samples {
            let th = i as f64 * dth;
            let x = self.chart.boundary_point(th)?;
            let xp = self.chart.boundary_point(th + 1e-6)?;
            let xm = self.chart.boundary_point(th - 1e-6)?;
            let mut tang = (xp - xm) / 2e-6;
            let n = self.chart.norm(&x, &tang);
            if n > 1e-12 {
                tang /= n;
            }
            sup = sup.max(self.pair(&x, &tang).norm());
        }
        Ok(sup)
    }
}

/// Semiclassical parameters: h, lambda, with mu = 1/h and s = mu + i lambda
/// always recomputed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemiclassicalParams {
    h: f64,
    lambda: f64,
}

impl SemiclassicalParams {
    pub fn new(h: f64, lambda: f64) -> Result<Self> {
        if !(h > 0.0 && h <= 1.0) {
            return Err(CoreError::Parameter(format!(
                "h must be in (0, 1], got {h}"
            )));
        }
        Ok(Self { h, lambda })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mu(&self) -> f64 {
        1.0 / self.h
    }

    pub fn s(&self) -> Complex64 {
        Complex64::new(self.mu(), self.lambda)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_recompute_s() {
        let p = SemiclassicalParams::new(0.1, 2.0).unwrap();
        assert_eq!(p.mu(), 10.0);
        assert_eq!(p.s(), Complex64::new(10.0, 2.0));
        assert!(SemiclassicalParams::new(0.0, 0.0).is_err());
        assert!(SemiclassicalParams::new(1.5, 0.0).is_err());
    }
}
