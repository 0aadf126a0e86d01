//! Concentration of quasimode pairs: finite-h slice integrals over the
//! transversal manifold against test functions, their geodesic-integral
//! limits, and the diagonal/mixed split at self-intersections.

use num_complex::Complex64;

use crate::error::{CoreError, Result};
use crate::fields::SampledOneForm;
use crate::geometry::Pt;
use crate::grid::{integrate_uniform, GridSpec};

use super::quasimode::{tube_cutoff, tube_cutoff_d1, BeamKind, GaussianBeam};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pairing {
    /// int v conj(w) psi dV.
    Product,
    /// h int <alpha, d v>_g conj(w) psi dV.
    AlphaDv,
    /// h int <alpha, d conj(w)>_g v psi dV.
    AlphaDw,
}

fn check_pair(v: &GaussianBeam, w: &GaussianBeam) -> Result<()> {
    if v.kind != BeamKind::Decaying || w.kind != BeamKind::Growing {
        return Err(CoreError::Contract(
            "concentration pairs a decaying beam with a growing one".into(),
        ));
    }
    if v.segments.len() != 1 || w.segments.len() != 1 {
        return Err(CoreError::Contract(
            "structured slice integrals need single-segment beams".into(),
        ));
    }
    if (v.params.h() - w.params.h()).abs() > 1e-15
        || (v.params.lambda() - w.params.lambda()).abs() > 1e-15
    {
        return Err(CoreError::Contract(
            "beams must share semiclassical parameters".into(),
        ));
    }
    Ok(())
}

/// Finite-h slice integral over {x1'} x M0 by tube quadrature with the
/// substitution z = sqrt(mu) y. `alpha` is required for the alpha pairings.
pub fn slice_integral(
    beam_v: &GaussianBeam,
    beam_w: &GaussianBeam,
    psi: &dyn Fn(&Pt) -> Complex64,
    x1p: f64,
    pairing: Pairing,
    alpha: Option<&SampledOneForm>,
) -> Result<Complex64> {
    check_pair(beam_v, beam_w)?;
    if matches!(pairing, Pairing::AlphaDv | Pairing::AlphaDw) && alpha.is_none() {
        return Err(CoreError::Contract("alpha pairing needs a 1-form".into()));
    }
    if x1p < beam_v.x1_range.0 || x1p > beam_v.x1_range.1 {
        return Err(CoreError::Domain(
            "slice coordinate outside the beam's x1 support".into(),
        ));
    }
    let seg_v = &beam_v.segments[0];
    let seg_w = &beam_w.segments[0];
    let params = beam_v.params;
    let mu = params.mu();
    let s = params.s();
    let h = params.h();
    let nu2 = beam_v.mu_pow() * beam_w.mu_pow();
    let length = beam_v.geo.exit_time;

    // Plane amplitude tables for both beams, with derivatives for the
    // alpha-dv/dw pairings.
    let plane = &beam_v.phi_tau.grid;
    let n_plane = plane.len();
    let mut a0 = vec![Complex64::new(0.0, 0.0); n_plane];
    let mut b0 = vec![Complex64::new(0.0, 0.0); n_plane];
    for i in 0..n_plane {
        let node = plane.node(i);
        a0[i] = beam_v.a0(seg_v, node[0], node[1]);
    }
    let planew = &beam_w.phi_tau.grid;
    for i in 0..n_plane {
        let node = plane.node(i);
        b0[i] = beam_w.a0(seg_w, node[0], node[1]);
        let _ = planew;
    }
    let a0_x = plane.deriv_axis(&a0, 0)?;
    let a0_t = plane.deriv_axis(&a0, 1)?;
    let b0_x = plane.deriv_axis(&b0, 0)?;
    let b0_t = plane.deriv_axis(&b0, 1)?;

    let nt = 600usize;
    let nz = 161usize;
    let zmax = beam_v.z_max().min(beam_w.z_max());
    let dt = length / (nt - 1) as f64;
    let dz = 2.0 * zmax / (nz - 1) as f64;
    let dp_v = beam_v.delta_prime;
    let dp_w = beam_w.delta_prime;

    let mut acc = Complex64::new(0.0, 0.0);
    for it in 0..nt {
        let t = it as f64 * dt;
        let wt = if it == 0 || it == nt - 1 { 0.5 } else { 1.0 };
        let av = plane.interp(&a0, &[x1p, t]);
        let avx = plane.interp(&a0_x, &[x1p, t]);
        let avt = plane.interp(&a0_t, &[x1p, t]);
        let bv = plane.interp(&b0, &[x1p, t]);
        let bvx = plane.interp(&b0_x, &[x1p, t]);
        let bvt = plane.interp(&b0_t, &[x1p, t]);
        let hv = seg_v.phase.h_scalar(t);
        let hvd = seg_v.phase.hdot_scalar(t);
        let hw = seg_w.phase.h_scalar(t);
        let hwd = seg_w.phase.hdot_scalar(t);
        for iz in 0..nz {
            let z = -zmax + iz as f64 * dz;
            let wz = if iz == 0 || iz == nz - 1 { 0.5 } else { 1.0 };
            let y = z / mu.sqrt();
            let p = beam_v.frame.chart_map(t, y);
            if beam_v.chart.boundary_value(&p) >= 0.0 {
                continue;
            }
            let chi_v = tube_cutoff(y / dp_v);
            let chi_w = tube_cutoff(y / dp_w);
            if chi_v == 0.0 || chi_w == 0.0 {
                continue;
            }
            // Shared phase (same Riccati data when both beams are built the
            // same way; keep them independent to be safe).
            let phi_v = Complex64::new(t, 0.0) + 0.5 * hv * y * y;
            let phi_w = Complex64::new(t, 0.0) + 0.5 * hw * y * y;
            let e_v = (Complex64::i() * s * phi_v).exp();
            let e_w = (Complex64::i() * s * phi_w).exp();
            let g = beam_v.frame.metric_in_frame(t, y);
            let det = (g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)]).max(0.0);
            let sd = det.sqrt();
            let ginv = [
                g[(1, 1)] / det,
                -g[(0, 1)] / det,
                g[(0, 0)] / det,
            ];
            let psi_val = psi(&p);
            let w_quad = wt * wz * sd;

            let term = match pairing {
                Pairing::Product => {
                    e_v * e_w.conj() * av * bv.conj() * (chi_v * chi_w * nu2) * psi_val
                }
                Pairing::AlphaDv | Pairing::AlphaDw => {
                    let al = alpha.unwrap();
                    let mut probe = Pt::zeros();
                    probe[0] = x1p;
                    probe[1] = p[0];
                    probe[2] = p[1];
                    let c = al.eval(&al.chart.wrap(&probe));
                    let (jt, jy) = beam_v.frame.tangents(t, y);
                    let al_t = c[1] * jt[0] + c[2] * jt[1];
                    let al_y = c[1] * jy[0] + c[2] * jy[1];
                    if pairing == Pairing::AlphaDv {
                        // d v components in (x1; t, y).
                        let phi_t = Complex64::new(1.0, 0.0) + 0.5 * hvd * y * y;
                        let phi_y = hv * y;
                        let dv1 = e_v * avx * chi_v;
                        let dvt = e_v * (Complex64::i() * s * phi_t * av + avt) * chi_v;
                        let dvy = e_v
                            * (Complex64::i() * s * phi_y * av * chi_v
                                + av * tube_cutoff_d1(y / dp_v) / dp_v);
                        let pairing_val = c[0] * dv1
                            + al_t * dvt * ginv[0]
                            + (al_t * dvy + al_y * dvt) * ginv[1]
                            + al_y * dvy * ginv[2];
                        pairing_val
                            * (e_w.conj() * bv.conj() * chi_w)
                            * (h * nu2)
                            * psi_val
                    } else {
                        let phi_t = Complex64::new(1.0, 0.0) + 0.5 * hwd * y * y;
                        let phi_y = hw * y;
                        let dw1 = e_w * bvx * chi_w;
                        let dwt = e_w * (Complex64::i() * s * phi_t * bv + bvt) * chi_w;
                        let dwy = e_w
                            * (Complex64::i() * s * phi_y * bv * chi_w
                                + bv * tube_cutoff_d1(y / dp_w) / dp_w);
                        // <alpha, d conj(w)>_g pairs the unconjugated form
                        // components with the conjugated derivative.
                        let pairing_val = c[0] * dw1.conj()
                            + al_t * dwt.conj() * ginv[0]
                            + (al_t * dwy.conj() + al_y * dwt.conj()) * ginv[1]
                            + al_y * dwy.conj() * ginv[2];
                        pairing_val * (e_v * av * chi_v) * (h * nu2) * psi_val
                    }
                }
            };
            acc += term * w_quad;
        }
    }
    Ok(acc * dt * dz / mu.sqrt())
}

/// Geodesic-integral limit of the slice pairing:
/// int_0^L e^{-2 lambda t} eta(x1', t) e^{Phi1 + conj(Phi2)} psi(gamma(t))
/// [1 | i alpha(gdot) | -i alpha(gdot)] dt.
pub fn geodesic_limit(
    beam_v: &GaussianBeam,
    beam_w: &GaussianBeam,
    psi: &dyn Fn(&Pt) -> Complex64,
    x1p: f64,
    pairing: Pairing,
    alpha: Option<&SampledOneForm>,
) -> Result<Complex64> {
    check_pair(beam_v, beam_w)?;
    let lambda = beam_v.params.lambda();
    let length = beam_v.geo.exit_time;
    let n = 1601usize;
    let dt = length / (n - 1) as f64;
    let mut vals = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 * dt;
        let gamma = beam_v.frame.chart_map(t, 0.0);
        let (gdot, _) = beam_v.frame.tangents(t, 0.0);
        let phi1 = beam_v
            .phi_tau
            .grid
            .interp(&beam_v.phi_tau.values, &[x1p, t]);
        let phi2 = beam_w
            .phi_tau
            .grid
            .interp(&beam_w.phi_tau.values, &[x1p, t]);
        let eta = match beam_v.kind {
            BeamKind::Decaying => (beam_v.eta)(x1p, t),
            BeamKind::Growing => Complex64::new(1.0, 0.0),
        };
        let factor = match pairing {
            Pairing::Product => Complex64::new(1.0, 0.0),
            Pairing::AlphaDv | Pairing::AlphaDw => {
                let al = alpha.ok_or_else(|| {
                    CoreError::Contract("alpha pairing needs a 1-form".into())
                })?;
                let mut probe = Pt::zeros();
                probe[0] = x1p;
                probe[1] = gamma[0];
                probe[2] = gamma[1];
                let c = al.eval(&al.chart.wrap(&probe));
                let a_t = c[1] * gdot[0] + c[2] * gdot[1];
                match pairing {
                    Pairing::AlphaDv => Complex64::i() * a_t,
                    _ => -Complex64::i() * a_t,
                }
            }
        };
        vals.push(
            (-2.0 * lambda * t).exp()
                * eta
                * (phi1 + phi2.conj()).exp()
                * psi(&gamma)
                * factor,
        );
    }
    Ok(integrate_uniform(&vals, dt))
}

/// Split of a brute-force slice integral over a transversal grid into the
/// full value and the branch-diagonal part; their difference is the mixed
/// (self-intersection cross) contribution.
#[derive(Debug, Clone, Copy)]
pub struct SliceSplit {
    pub full: Complex64,
    pub diagonal: Complex64,
}

impl SliceSplit {
    pub fn mixed(&self) -> Complex64 {
        self.full - self.diagonal
    }
}

/// Brute-force slice integral on a transversal quadrature grid; branch
/// pairing is by proximity of the tube times of the v- and w-branches.
pub fn slice_integral_grid(
    beam_v: &GaussianBeam,
    beam_w: &GaussianBeam,
    psi: &dyn Fn(&Pt) -> Complex64,
    x1p: f64,
    grid: &GridSpec,
) -> Result<SliceSplit> {
    if beam_v.kind != BeamKind::Decaying || beam_w.kind != BeamKind::Growing {
        return Err(CoreError::Contract(
            "slice split pairs a decaying beam with a growing one".into(),
        ));
    }
    let mut full = Complex64::new(0.0, 0.0);
    let mut diag = Complex64::new(0.0, 0.0);
    for i in 0..grid.len() {
        let node = grid.node(i);
        let p = crate::geometry::pt(&node);
        if beam_v.chart.boundary_value(&p) >= 0.0 {
            continue;
        }
        let vb = beam_v.eval_branches(x1p, &p);
        let wb = beam_w.eval_branches(x1p, &p);
        if vb.is_empty() || wb.is_empty() {
            continue;
        }
        let vsum: Complex64 = vb.iter().map(|(_, v)| v).sum();
        let wsum: Complex64 = wb.iter().map(|(_, v)| v).sum();
        let g = beam_v.chart.metric(&p);
        let det = (g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)]).max(0.0);
        let w = grid.quad_weight(i) * det.sqrt() * psi(&p);
        full += vsum * wsum.conj() * w;
        // Diagonal: match branches by tube time.
        for (tv, vv) in &vb {
            for (tw, wv) in &wb {
                if (tv - tw).abs() < 0.1 {
                    diag += vv * wv.conj() * w;
                }
            }
        }
    }
    Ok(SliceSplit {
        full,
        diagonal: diag,
    })
}
