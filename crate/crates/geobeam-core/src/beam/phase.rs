//! Gaussian beam phase phi(t, y) = t + H(t) y^2 / 2 on a Fermi tube, with
//! the Riccati source assembled from the tube metric and the eikonal defect
//! verified to vanish to third order off the axis.

use num_complex::Complex64;

use crate::error::{CoreError, Result};
use crate::geometry::FermiFrame;

use super::riccati::{solve_riccati, CMat, RiccatiSolution};

#[derive(Debug, Clone)]
pub struct BeamPhase {
    pub ric: RiccatiSolution,
    /// Lower quadratic bound: Im phi >= c y^2 with c = min_t min-eig(Im H)/2.
    pub im_lower: f64,
    /// Fitted eikonal defect exponent (defect = O(|y|^expo)).
    pub defect_exponent: f64,
}

impl BeamPhase {
    pub fn h_scalar(&self, t: f64) -> Complex64 {
        self.ric.h_at(t)[(0, 0)]
    }

    pub fn hdot_scalar(&self, t: f64) -> Complex64 {
        self.ric.hdot_at(t)[(0, 0)]
    }

    pub fn phi(&self, t: f64, y: f64) -> Complex64 {
        Complex64::new(t, 0.0) + 0.5 * self.h_scalar(t) * y * y
    }

    /// (d_t phi, d_y phi).
    pub fn dphi(&self, t: f64, y: f64) -> (Complex64, Complex64) {
        (
            Complex64::new(1.0, 0.0) + 0.5 * self.hdot_scalar(t) * y * y,
            self.h_scalar(t) * y,
        )
    }

    /// Pointwise eikonal defect <d phi, d phi>_{g0} - 1 in tube coordinates.
    pub fn eikonal_defect(&self, frame: &FermiFrame, t: f64, y: f64) -> Complex64 {
        self.eikonal_defect_with(&frame.metric_in_frame(t, y), t, y)
    }

    /// Defect against an explicitly supplied frame metric (used to sample at
    /// stored nodes, where the metric carries no interpolation error).
    pub fn eikonal_defect_with(
        &self,
        g: &nalgebra::Matrix2<f64>,
        t: f64,
        y: f64,
    ) -> Complex64 {
        let (pt_, py) = self.dphi(t, y);
        let det = g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)];
        let inv = [
            [g[(1, 1)] / det, -g[(0, 1)] / det],
            [-g[(1, 0)] / det, g[(0, 0)] / det],
        ];
        pt_ * pt_ * inv[0][0] + pt_ * py * 2.0 * inv[0][1] + py * py * inv[1][1]
            - Complex64::new(1.0, 0.0)
    }
}

/// Assemble the Riccati source F(t) = d^2_y g_tt(t, 0) / 2 from the frame
/// metric and solve for the phase Hessian.
pub fn build_phase(
    frame: &FermiFrame,
    h0: Complex64,
    t0: f64,
    n_nodes: usize,
) -> Result<BeamPhase> {
    let (t_lo, t_hi) = frame.t_range();
    // The raw source samples inherit piecewise-linear kinks from the frame
    // interpolation; a least-squares Legendre fit restores the smoothness
    // the Riccati residual check expects.
    let raw: Vec<(f64, f64)> = (0..96)
        .map(|i| {
            let t = t_lo + (t_hi - t_lo) * i as f64 / 95.0;
            (t, 0.5 * frame.d2y_gtt_on_axis(t))
        })
        .collect();
    let coeffs = legendre_fit(&raw, t_lo, t_hi, 12);
    let source = move |t: f64| -> CMat {
        let mut m = CMat::zeros(1, 1);
        m[(0, 0)] = Complex64::new(legendre_eval(&coeffs, t, t_lo, t_hi), 0.0);
        m
    };
    let mut h0m = CMat::zeros(1, 1);
    h0m[(0, 0)] = h0;
    let ric = solve_riccati(source, &h0m, t_lo, t_hi, t0, n_nodes)?;
    let im_lower = 0.5 * ric.min_im_eig();

    let phase = BeamPhase {
        ric,
        im_lower,
        defect_exponent: 0.0,
    };

    // Fit the defect exponent over dyadic |y| levels and a t-sample. On
    // curved frames the metric is taken at stored nodes, where it carries no
    // interpolation error that could mask the cubic decay.
    let mut logs = Vec::new();
    if frame.is_flat() {
        let y_top = 0.5 * frame.half_width;
        for k in 0..5 {
            let y = y_top * 0.5f64.powi(k);
            let mut sup = 0.0f64;
            for i in 0..17 {
                let t = t_lo + (t_hi - t_lo) * i as f64 / 16.0;
                sup = sup.max(phase.eikonal_defect(frame, t, y).norm());
                sup = sup.max(phase.eikonal_defect(frame, t, -y).norm());
            }
            logs.push((y.ln(), sup.max(1e-300).ln()));
        }
    } else {
        let (ts, ys) = frame.node_axes();
        let mid = ys.len() / 2;
        let mut off = mid / 2;
        while off >= 1 {
            let mut sup = 0.0f64;
            for (i, &t) in ts.iter().enumerate().step_by(8.max(ts.len() / 20)) {
                for j in [mid - off, mid + off] {
                    let g = frame.metric_at_node(i, j);
                    sup = sup.max(phase.eikonal_defect_with(&g, t, ys[j]).norm());
                }
            }
            logs.push((ys[mid + off].ln(), sup.max(1e-300).ln()));
            off /= 2;
        }
    }
    let expo = fit_slope(&logs);
    // Exactly flat tubes have zero defect at roundoff; call that exponent
    // large rather than fitting noise.
    let max_defect = logs.iter().map(|&(_, l)| l.exp()).fold(0.0f64, f64::max);
    let expo = if max_defect < 1e-13 { 4.0 } else { expo };
    if expo < 2.5 {
        return Err(CoreError::Construction(format!(
            "eikonal defect exponent {expo:.2} below 2.5: wrong Riccati source assembly"
        )));
    }
    Ok(BeamPhase {
        defect_exponent: expo,
        ..phase
    })
}

fn legendre_basis(k: usize, u: f64) -> f64 {
    let (mut p0, mut p1) = (1.0, u);
    if k == 0 {
        return 1.0;
    }
    for n in 2..=k {
        let nf = n as f64;
        let p2 = ((2.0 * nf - 1.0) * u * p1 - (nf - 1.0) * p0) / nf;
        p0 = p1;
        p1 = p2;
    }
    p1
}

fn legendre_fit(samples: &[(f64, f64)], lo: f64, hi: f64, degree: usize) -> Vec<f64> {
    let m = degree + 1;
    let mut ata = nalgebra::DMatrix::<f64>::zeros(m, m);
    let mut atb = nalgebra::DVector::<f64>::zeros(m);
    for &(t, v) in samples {
        let u = (2.0 * (t - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0);
        let row: Vec<f64> = (0..m).map(|k| legendre_basis(k, u)).collect();
        for a in 0..m {
            atb[a] += row[a] * v;
            for b in 0..m {
                ata[(a, b)] += row[a] * row[b];
            }
        }
    }
    for a in 0..m {
        ata[(a, a)] += 1e-12;
    }
    ata.cholesky()
        .map(|c| c.solve(&atb).iter().cloned().collect())
        .unwrap_or_else(|| vec![0.0; m])
}

fn legendre_eval(coeffs: &[f64], t: f64, lo: f64, hi: f64) -> f64 {
    let u = (2.0 * (t - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0);
    coeffs
        .iter()
        .enumerate()
        .map(|(k, &c)| c * legendre_basis(k, u))
        .sum()
}

fn fit_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{
        fermi_coordinates, integrate_geodesic, pt, FermiOptions, GeodesicOptions, MetricChart,
        Pt,
    };
    use approx::assert_relative_eq;

    #[test]
    fn flat_case_defect_is_fourth_order() {
        let chart = MetricChart::euclidean_disk(1.0);
        let geo = integrate_geodesic(
            &chart,
            &pt(&[1.0, 0.0]),
            &pt(&[-1.0, 0.0]),
            &GeodesicOptions::default(),
        )
        .unwrap();
        let frame = fermi_coordinates(&chart, &geo, 0.4, &FermiOptions::default()).unwrap();
        let phase = build_phase(&frame, Complex64::new(0.0, 1.0), 0.0, 2001).unwrap();
        // Flat: F = 0, so H(t) = (t - i)^{-1}; measured defect exponent is
        // within a hair of 4 since Hdot + H^2 = 0 kills the |y|^2 term.
        assert!(
            phase.defect_exponent >= 3.7,
            "exponent {}",
            phase.defect_exponent
        );
        // On the axis the phase is exactly t.
        let d = phase.eikonal_defect(&frame, 0.7, 0.0);
        assert!(d.norm() < 1e-8);
        // Quadratic lower bound for Im phi across the tube.
        for &t in &[0.1, 1.0, 1.9] {
            for &y in &[-0.2, 0.05, 0.18] {
                let im = phase.phi(t, y).im;
                assert!(im + 1e-12 >= phase.im_lower * y * y);
                if y != 0.0 {
                    assert!(im > 0.0);
                }
            }
        }
    }

    #[test]
    fn curved_case_defect_is_cubic_or_better() {
        let chart =
            MetricChart::conformal_disk(1.0, |x: &Pt| 1.0 + 0.15 * (-x.norm_squared()).exp());
        let x0 = chart.boundary_point(0.2).unwrap();
        let nu = chart.outward_normal(&x0).unwrap();
        let geo = integrate_geodesic(
            &chart,
            &x0,
            &(-nu),
            &GeodesicOptions {
                step: 1e-3,
                ..Default::default()
            },
        )
        .unwrap();
        let frame = fermi_coordinates(
            &chart,
            &geo,
            0.25,
            &FermiOptions {
                nt: 161,
                ny: 49,
                ..Default::default()
            },
        )
        .unwrap();
        let phase = build_phase(&frame, Complex64::new(0.0, 1.0), 0.0, 1501).unwrap();
        assert!(
            phase.defect_exponent >= 2.7,
            "exponent {}",
            phase.defect_exponent
        );
        assert!(phase.im_lower > 0.0);
    }

    #[test]
    fn sphere_riccati_source_matches_curvature() {
        // On the cap the Fermi tube of a geodesic has g_tt = cos^2(y), so
        // F = -1 (minus the Gauss curvature).
        let chart = MetricChart::spherical_cap(0.5);
        let rho = ((1.0f64 - 0.5) / 1.5).sqrt();
        let x0 = pt(&[rho, 0.0]);
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
                nt: 121,
                ny: 41,
                ..Default::default()
            },
        )
        .unwrap();
        for &t in &[0.2, 0.5, 0.8] {
            let f = 0.5 * frame.d2y_gtt_on_axis(t);
            assert_relative_eq!(f, -1.0, epsilon = 2e-3);
        }
    }
}
