//! Leading-order boundary determination: oscillatory quasi-solutions
//! concentrated at a boundary point and the small-lambda limit recovering
//! the tangential component of the magnetic potential there.
//!
//! All norms and recovery integrals are evaluated in the concentration-
//! adapted variables y' = x'/sqrt(lambda), y_n = x_n/lambda, where the
//! integrands are lambda-uniform; the oscillatory phase cancels in the
//! sesquilinear combination v0 d conj(v0) - conj(v0) d v0, so nothing ever
//! resolves the 1/lambda oscillation on a grid.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{CoreError, Result};
use crate::fields::SampledField;
use crate::geometry::{pt, MetricChart, Pt};
use crate::grid::GridSpec;
use crate::par::{map_indexed, ExecMode};

/// Profile eta(x) = C b(|x'|/w) b(x_n/w) with b(s) = (1 - s^2)_+^3 and C
/// fixed by the boundary normalization int eta(x', 0)^2 dx' = 1.
#[derive(Debug, Clone, Copy)]
pub struct Profile {
    pub width: f64,
    norm_const: f64,
}

fn bump(s: f64) -> f64 {
    let v = 1.0 - s * s;
    if v > 0.0 {
        v * v * v
    } else {
        0.0
    }
}

fn bump_d(s: f64) -> f64 {
    let v = 1.0 - s * s;
    if v > 0.0 {
        -6.0 * s * v * v
    } else {
        0.0
    }
}

impl Profile {
    pub fn new(width: f64) -> Self {
        // int_{R^2} b(|y'|/w)^2 dy' = w^2 2 pi int_0^1 s (1-s^2)^6 ds
        //                           = w^2 2 pi / 14 (exact).
        let integral = width * width * std::f64::consts::TAU / 14.0;
        Self {
            width,
            norm_const: 1.0 / integral.sqrt(),
        }
    }

    pub fn eta(&self, x: &Pt) -> f64 {
        let rp = (x[0] * x[0] + x[1] * x[1]).sqrt();
        self.norm_const * bump(rp / self.width) * bump(x[2] / self.width)
    }

    /// Gradient of eta in chart coordinates.
    pub fn eta_grad(&self, x: &Pt) -> [f64; 3] {
        let w = self.width;
        let rp = (x[0] * x[0] + x[1] * x[1]).sqrt().max(1e-300);
        let bt = bump(rp / w);
        let bn = bump(x[2] / w);
        let dbt = bump_d(rp / w) / w;
        let dbn = bump_d(x[2] / w) / w;
        [
            self.norm_const * dbt * (x[0] / rp) * bn,
            self.norm_const * dbt * (x[1] / rp) * bn,
            self.norm_const * bt * dbn,
        ]
    }

    /// Boundary normalization defect |int eta(x',0)^2 dx' - 1|, verified
    /// with an independent composite-Simpson radial quadrature.
    pub fn normalization_defect(&self) -> f64 {
        let n = 4001;
        let vals: Vec<f64> = (0..n)
            .map(|i| {
                let s = i as f64 / (n - 1) as f64;
                s * bump(s).powi(2)
            })
            .collect();
        let radial = crate::grid::integrate_uniform_real(&vals, 1.0 / (n - 1) as f64);
        let integral =
            self.norm_const * self.norm_const * self.width * self.width
                * std::f64::consts::TAU
                * radial;
        (integral - 1.0).abs()
    }
}

/// Oscillatory probe at a boundary point in boundary normal coordinates:
/// v0(x) = eta(x / sqrt(lambda)) e^{(i/lambda)(tau' . x' + i x_n)}.
#[derive(Debug, Clone)]
pub struct BoundaryProbe {
    /// Unit tangent covector tau' at the boundary point.
    pub tangent: [f64; 2],
    pub lambda: f64,
    pub profile: Profile,
    /// Block metric g(x', x_n) of the boundary normal chart (g_nn = 1).
    pub chart: MetricChart,
}

impl BoundaryProbe {
    pub fn new(chart: &MetricChart, tangent: [f64; 2], lambda: f64, profile: Profile) -> Result<Self> {
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(CoreError::Parameter("lambda must be in (0,1)".into()));
        }
        // Boundary normal chart contract: block metric with g_nn = 1.
        for probe in [[0.1, -0.2, 0.15], [0.0, 0.0, 0.05], [-0.2f64, 0.1, 0.3]] {
            let g = chart.metric_full(&pt(&probe));
            if (g[(2, 2)] - 1.0).abs() > 1e-10
                || g[(0, 2)].abs() > 1e-10
                || g[(1, 2)].abs() > 1e-10
            {
                return Err(CoreError::Geometry(
                    "chart is not in boundary normal form (g_nn must be 1)".into(),
                ));
            }
        }
        Ok(Self {
            tangent,
            lambda,
            profile: Profile::new(profile.width),
            chart: chart.clone(),
        })
    }

    /// Sampled v0 on a half-space grid; support must fit inside the grid.
    pub fn oscillatory_data(&self, grid: &GridSpec) -> Result<SampledField> {
        let support = self.profile.width * self.lambda.sqrt();
        for k in 0..2 {
            if grid.mins[k] > -support || grid.axis_coord(k, grid.shape[k] - 1) < support {
                return Err(CoreError::Domain(
                    "probe support overflows the chart grid".into(),
                ));
            }
        }
        let lam = self.lambda;
        let tangent = self.tangent;
        let profile = self.profile;
        Ok(SampledField::from_fn(&self.chart, grid, |x| {
            let scaled = pt(&[
                x[0] / lam.sqrt(),
                x[1] / lam.sqrt(),
                x[2] / lam.sqrt(),
            ]);
            let eta = profile.eta(&scaled);
            let phase =
                Complex64::i() * ((tangent[0] * x[0] + tangent[1] * x[1]) / lam)
                    - x[2] / lam;
            eta * phase.exp()
        }))
    }

    /// ||v0||_{L2} by quadrature in concentration variables.
    pub fn v0_l2(&self) -> f64 {
        let lam = self.lambda;
        let acc = self.scaled_quadrature(|y| {
            let eta = self.profile.eta(&pt(&[y[0], y[1], lam.sqrt() * y[2]]));
            eta * eta
        });
        acc.sqrt() * lam
    }

    /// ||d v0||_{L2}.
    pub fn dv0_l2(&self) -> f64 {
        self.weighted_grad_norm(0)
    }

    /// ||delta(x) d v0||_{L2} with delta the boundary distance x_n.
    pub fn delta_dv0_l2(&self) -> f64 {
        self.weighted_grad_norm(1)
    }

    fn weighted_grad_norm(&self, xn_power: i32) -> f64 {
        let lam = self.lambda;
        let tau = self.tangent;
        let acc = self.scaled_quadrature(|y| {
            // x = (sqrt(lam) y', lam y_n); |d v0|^2 with analytic
            // derivatives; modulus only (phase factors cancel).
            let xs = pt(&[y[0], y[1], lam.sqrt() * y[2]]);
            let eta = self.profile.eta(&xs);
            let grad = self.profile.eta_grad(&xs);
            // d_alpha v0 = e * (lam^{-1/2} d_alpha eta + i lam^{-1} tau eta)
            let da1 = Complex64::new(grad[0] / lam.sqrt(), tau[0] * eta / lam);
            let da2 = Complex64::new(grad[1] / lam.sqrt(), tau[1] * eta / lam);
            // d_n v0 = e * (lam^{-1/2} d_n eta * (d x_n-scaling) - eta/lam)
            let dan = Complex64::new(grad[2] / lam.sqrt() - eta / lam, 0.0);
            let w = (lam * y[2]).powi(xn_power);
            w * w * (da1.norm_sqr() + da2.norm_sqr() + dan.norm_sqr())
        });
        (acc * lam * lam).sqrt()
    }

    /// Quadrature over the concentration box y' in [-w, w]^2, y_n >= 0 with
    /// the e^{-2 y_n} factor; the closure receives y and profile data.
    fn scaled_quadrature<F>(&self, f: F) -> f64
    where
        F: Fn(&Pt) -> f64,
    {
        let w = self.profile.width;
        let np = 64usize;
        let nn = 96usize;
        let yn_max = 12.0f64.min(w / self.lambda.sqrt());
        let dp = 2.0 * w / np as f64;
        let dn = yn_max / nn as f64;
        let mut acc = 0.0;
        for i in 0..np {
            for j in 0..np {
                for k in 0..nn {
                    let y = pt(&[
                        -w + (i as f64 + 0.5) * dp,
                        -w + (j as f64 + 0.5) * dp,
                        (k as f64 + 0.5) * dn,
                    ]);
                    let weight = (-2.0 * y[2]).exp() * dp * dp * dn;
                    acc += f(&y) * weight;
                }
            }
        }
        acc
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RecoveryReport {
    pub lambdas: Vec<f64>,
    pub values_re: Vec<f64>,
    pub values_im: Vec<f64>,
    pub extrapolated: Option<(f64, f64)>,
    pub converged: bool,
}

/// I1(lambda) = lambda^{-(n-1)/2} int i <A~, v0 d conj(v0) - conj(v0) d v0>
/// dV, evaluated in concentration variables; the sesquilinear combination
/// collapses to -2i/lambda eta^2 e^{-2 x_n/lambda} tau'.dx', so the integral
/// is smooth in the scaled coordinates.
pub fn recovery_integral<F>(probe: &BoundaryProbe, a_tilde: &F, lambda: f64) -> Complex64
where
    F: Fn(&Pt) -> [Complex64; 3] + Sync,
{
    let w = probe.profile.width;
    let tau = probe.tangent;
    let np = 72usize;
    let nn = 96usize;
    let yn_max: f64 = 12.0;
    let dp = 2.0 * w / np as f64;
    let dn = yn_max / nn as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..np {
        for j in 0..np {
            for k in 0..nn {
                let y = pt(&[
                    -w + (i as f64 + 0.5) * dp,
                    -w + (j as f64 + 0.5) * dp,
                    (k as f64 + 0.5) * dn,
                ]);
                let x = pt(&[lambda.sqrt() * y[0], lambda.sqrt() * y[1], lambda * y[2]]);
                let eta = probe.profile.eta(&pt(&[y[0], y[1], lambda.sqrt() * y[2]]));
                if eta == 0.0 {
                    continue;
                }
                let g = probe.chart.metric_full(&x);
                let det = g.determinant().max(0.0);
                let gi = g.try_inverse().unwrap();
                let a = a_tilde(&x);
                let mut pairing = Complex64::new(0.0, 0.0);
                for al in 0..2 {
                    for be in 0..2 {
                        pairing += a[al] * gi[(al, be)] * tau[be];
                    }
                }
                acc += pairing
                    * (2.0 * eta * eta * (-2.0 * y[2]).exp() * det.sqrt() * dp * dp * dn);
            }
        }
    }
    acc
}

/// Sweep a decreasing lambda sequence and extrapolate to lambda = 0 by a
/// least-squares linear fit (in lambda) on the tail of the sequence.
pub fn tangential_recovery<F>(
    probe: &BoundaryProbe,
    a_tilde: &F,
    lambdas: &[f64],
    mode: ExecMode,
) -> Result<RecoveryReport>
where
    F: Fn(&Pt) -> [Complex64; 3] + Sync,
{
    if lambdas.len() < 3 {
        return Err(CoreError::Contract("need at least 3 lambda values".into()));
    }
    let vals: Vec<Complex64> = map_indexed(mode, lambdas.len(), |k| {
        recovery_integral(probe, a_tilde, lambdas[k])
    });
    // Convergence: the tail differences must shrink.
    let n = vals.len();
    let d_last = (vals[n - 1] - vals[n - 2]).norm();
    let d_prev = (vals[n - 2] - vals[n - 3]).norm();
    let converged = d_last <= d_prev + 1e-12;
    let extrapolated = if converged {
        // Linear fit I(lambda) ~ I0 + c lambda over the last half.
        let m = (n / 2).max(2);
        let pts: Vec<(f64, Complex64)> = (n - m..n).map(|k| (lambdas[k], vals[k])).collect();
        let sw = m as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sy: Complex64 = pts.iter().map(|p| p.1).sum();
        let sxy: Complex64 = pts.iter().map(|p| p.1 * p.0).sum();
        let det = sw * sxx - sx * sx;
        let i0 = (sy * sxx - sxy * sx) / det;
        Some((i0.re, i0.im))
    } else {
        None
    };
    Ok(RecoveryReport {
        lambdas: lambdas.to_vec(),
        values_re: vals.iter().map(|v| v.re).collect(),
        values_im: vals.iter().map(|v| v.im).collect(),
        extrapolated,
        converged,
    })
}

/// Flat half-space boundary normal chart {x_n >= 0}.
pub fn flat_halfspace_chart() -> MetricChart {
    MetricChart::builder(3, "halfspace")
        .metric(|_| crate::geometry::Mat3::identity())
        .flat()
        .boundary(|x: &Pt| -x[2])
        .valid_box(&[-5.0, -5.0, -1.0], &[5.0, 5.0, 5.0])
        .build()
}
