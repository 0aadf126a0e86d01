//! Certified H^{-1}_scl residual bound for e^{s x1} h^2 L_{g,A,q} e^{-s x1}
//! applied to a Gaussian beam quasimode. The residual is split into term
//! groups evaluated analytically on the tube (the exponentials enter only
//! through e^{-mu Im phi - lambda Re phi}); the rough part of the magnetic
//! potential contributes a declared divergence term d*(w1), bounded by
//! h^{-1} ||w1||_{L2} and never differentiated numerically.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{CoreError, Result};
use crate::fields::{SampledField, SampledOneForm};
use crate::geometry::Pt;
use crate::par::{map_indexed, ExecMode};

use super::quasimode::{tube_cutoff, tube_cutoff_d1, tube_cutoff_d2, GaussianBeam};

#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    pub h: f64,
    pub tau: f64,
    /// Certified H^{-1}_scl upper bound ||w0|| + ||w1|| / h.
    pub bound: f64,
    pub smooth_norm: f64,
    pub rough_div_over_h: f64,
    /// Term-group L2 norms.
    pub eikonal: f64,
    pub transport: f64,
    pub second_order: f64,
    pub zeroth_order: f64,
    pub rough_l2: f64,
    /// Contribution of the tube-cutoff derivatives alone.
    pub cutoff: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct ResidualOptions {
    pub nt: usize,
    pub nz: usize,
    pub mode: ExecMode,
}

impl Default for ResidualOptions {
    fn default() -> Self {
        Self {
            nt: 301,
            nz: 141,
            mode: ExecMode::Parallel,
        }
    }
}

/// Geometry tables on the (t, z) quadrature lattice (x1-independent).
struct GeoTables {
    /// chart point per node.
    point: Vec<Pt>,
    inside: Vec<bool>,
    /// frame tangents.
    jt: Vec<Pt>,
    jy: Vec<Pt>,
    /// inverse frame metric entries (tt, ty, yy).
    ginv: Vec<[f64; 3]>,
    sqrt_det: Vec<f64>,
    /// D_b = sum_a d_a (sqrt(g) g^{ab}).
    div_w: Vec<[f64; 2]>,
}

fn build_geo_tables(beam: &GaussianBeam, ts: &[f64], ys: &[f64]) -> GeoTables {
    let (nt, nz) = (ts.len(), ys.len());
    let frame = &beam.frame;
    let mut point = vec![Pt::zeros(); nt * nz];
    let mut inside = vec![false; nt * nz];
    let mut jt = vec![Pt::zeros(); nt * nz];
    let mut jy = vec![Pt::zeros(); nt * nz];
    let mut ginv = vec![[1.0, 0.0, 1.0]; nt * nz];
    let mut sqrt_det = vec![1.0; nt * nz];
    let mut w_tt = vec![1.0; nt * nz];
    let mut w_ty = vec![0.0; nt * nz];
    let mut w_yy = vec![1.0; nt * nz];
    for (i, &t) in ts.iter().enumerate() {
        for (j, &y) in ys.iter().enumerate() {
            let idx = i * nz + j;
            let p = frame.chart_map(t, y);
            point[idx] = p;
            inside[idx] = beam.chart.boundary_value(&p) < 0.0;
            let (a, b) = frame.tangents(t, y);
            jt[idx] = a;
            jy[idx] = b;
            let g = frame.metric_in_frame(t, y);
            let det = (g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)]).max(1e-300);
            let sd = det.sqrt();
            ginv[idx] = [g[(1, 1)] / det, -g[(0, 1)] / det, g[(0, 0)] / det];
            sqrt_det[idx] = sd;
            w_tt[idx] = sd * ginv[idx][0];
            w_ty[idx] = sd * ginv[idx][1];
            w_yy[idx] = sd * ginv[idx][2];
        }
    }
    let dt = ts[1] - ts[0];
    let dy = ys[1] - ys[0];
    let mut div_w = vec![[0.0f64; 2]; nt * nz];
    let d = |arr: &[f64], i: usize, j: usize, axis: usize| -> f64 {
        let at = |a: isize, b: isize| -> f64 {
            let a = a.clamp(0, nt as isize - 1) as usize;
            let b = b.clamp(0, nz as isize - 1) as usize;
            arr[a * nz + b]
        };
        let (ii, jj) = (i as isize, j as isize);
        match axis {
            0 => (at(ii + 1, jj) - at(ii - 1, jj)) / (2.0 * dt),
            _ => (at(ii, jj + 1) - at(ii, jj - 1)) / (2.0 * dy),
        }
    };
    for i in 0..nt {
        for j in 0..nz {
            div_w[i * nz + j] = [
                d(&w_tt, i, j, 0) + d(&w_ty, i, j, 1),
                d(&w_ty, i, j, 0) + d(&w_yy, i, j, 1),
            ];
        }
    }
    GeoTables {
        point,
        inside,
        jt,
        jy,
        ginv,
        sqrt_det,
        div_w,
    }
}

/// Evaluate the term groups of the conjugated-operator residual and return
/// the certified bound with a per-group report. Single-segment beams only
/// (residual sweeps run on non-self-intersecting geodesics).
pub fn residual_bound(
    beam: &GaussianBeam,
    a_raw: &SampledOneForm,
    q: &SampledField,
    opts: &ResidualOptions,
) -> Result<ResidualReport> {
    if beam.segments.len() != 1 {
        return Err(CoreError::Contract(
            "residual bounds are evaluated on single-segment beams".into(),
        ));
    }
    if a_raw.grid != beam.a_tau.grid {
        return Err(CoreError::Contract(
            "raw potential grid must match the beam's mollified potential".into(),
        ));
    }
    if q.grid != a_raw.grid {
        return Err(CoreError::Contract("q must share the potential grid".into()));
    }
    let seg = &beam.segments[0];
    let params = beam.params;
    let h = params.h();
    let mu = params.mu();
    let s = params.s();
    let lambda = params.lambda();
    let nu = beam.mu_pow();
    let dp = beam.delta_prime;

    // Plane amplitude tables and derivatives.
    let plane = &beam.phi_tau.grid;
    let n_plane = plane.len();
    let mut a0 = vec![Complex64::new(0.0, 0.0); n_plane];
    for (i, slot) in a0.iter_mut().enumerate() {
        let node = plane.node(i);
        *slot = beam.a0(seg, node[0], node[1]);
    }
    let a0_x = plane.deriv_axis(&a0, 0)?;
    let a0_t = plane.deriv_axis(&a0, 1)?;
    let a0_xx = plane.deriv_axis(&a0_x, 0)?;
    let a0_tt = plane.deriv_axis(&a0_t, 1)?;

    // d (A_tau)_1 / d x1 on the potential grid.
    let da1_dx1 = a_raw.grid.deriv_axis(&beam.a_tau.components[0], 0)?;

    // Quadrature lattice.
    let length = beam.geo.exit_time;
    let nt = opts.nt;
    let nz = opts.nz;
    let zmax = beam.z_max();
    let ts: Vec<f64> = (0..nt)
        .map(|i| length * i as f64 / (nt - 1) as f64)
        .collect();
    let zs: Vec<f64> = (0..nz)
        .map(|k| -zmax + 2.0 * zmax * k as f64 / (nz - 1) as f64)
        .collect();
    let ys: Vec<f64> = zs.iter().map(|&z| z / mu.sqrt()).collect();
    let dt = ts[1] - ts[0];
    let dy = ys[1] - ys[0];
    let dz = zs[1] - zs[0];
    let geo = build_geo_tables(beam, &ts, &ys);

    // H, Hdot, Hddot along the t-lattice.
    let hval: Vec<Complex64> = ts.iter().map(|&t| seg.phase.h_scalar(t)).collect();
    let hdot: Vec<Complex64> = ts.iter().map(|&t| seg.phase.hdot_scalar(t)).collect();
    let hddot: Vec<Complex64> = (0..nt)
        .map(|i| {
            let im = i.clamp(1, nt - 2);
            (hdot[im + 1] - hdot[im - 1]) / (2.0 * dt)
        })
        .collect();

    let x1_nodes: Vec<f64> = (0..plane.shape[0])
        .map(|i| plane.axis_coord(0, i))
        .filter(|&x| x >= beam.x1_range.0 && x <= beam.x1_range.1)
        .collect();
    let nx = x1_nodes.len();
    let dx1 = plane.steps[0];

    // Per-slice accumulation (parallel over x1), deterministic reduction.
    let slice_sums: Vec<[f64; 8]> = map_indexed(opts.mode, nx, |ix| {
        let x1 = x1_nodes[ix];
        let wx = if ix == 0 || ix == nx - 1 { 0.5 } else { 1.0 };

        // Pulled-back mollified potential on the (t, z) lattice, with its
        // transversal derivatives by central differences on the lattice
        // (A_tau is smooth at scale tau >> lattice step).
        let n2 = nt * nz;
        let mut tau1 = vec![Complex64::new(0.0, 0.0); n2];
        let mut taut = vec![Complex64::new(0.0, 0.0); n2];
        let mut tauy = vec![Complex64::new(0.0, 0.0); n2];
        let mut tau_uv = vec![(Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)); n2];
        for idx in 0..n2 {
            let p = geo.point[idx];
            let mut probe = Pt::zeros();
            probe[0] = x1;
            probe[1] = p[0];
            probe[2] = p[1];
            let c = beam.a_tau.eval(&beam.a_tau.chart.wrap(&probe));
            tau1[idx] = c[0];
            taut[idx] = c[1] * geo.jt[idx][0] + c[2] * geo.jt[idx][1];
            tauy[idx] = c[1] * geo.jy[idx][0] + c[2] * geo.jy[idx][1];
            tau_uv[idx] = (c[1], c[2]);
        }
        let dmat = |arr: &[Complex64], i: usize, j: usize, axis: usize| -> Complex64 {
            let at = |a: isize, b: isize| -> Complex64 {
                let a = a.clamp(0, nt as isize - 1) as usize;
                let b = b.clamp(0, nz as isize - 1) as usize;
                arr[a * nz + b]
            };
            let (ii, jj) = (i as isize, j as isize);
            match axis {
                0 => (at(ii + 1, jj) - at(ii - 1, jj)) / (2.0 * dt),
                _ => (at(ii, jj + 1) - at(ii, jj - 1)) / (2.0 * dy),
            }
        };

        let mut acc = [0.0f64; 8];
        for it in 0..nt {
            let t = ts[it];
            let wt = if it == 0 || it == nt - 1 { 0.5 } else { 1.0 };
            let an = plane.interp(&a0, &[x1, t]);
            let anx = plane.interp(&a0_x, &[x1, t]);
            let ant = plane.interp(&a0_t, &[x1, t]);
            let anxx = plane.interp(&a0_xx, &[x1, t]);
            let antt = plane.interp(&a0_tt, &[x1, t]);
            let hh = hval[it];
            let hd = hdot[it];
            let hdd = hddot[it];
            for iz in 0..nz {
                let idx = it * nz + iz;
                if !geo.inside[idx] {
                    continue;
                }
                let y = ys[iz];
                let wz = if iz == 0 || iz == nz - 1 { 0.5 } else { 1.0 };
                let ginv = geo.ginv[idx];
                let sd = geo.sqrt_det[idx];
                let divw = geo.div_w[idx];
                let p = geo.point[idx];

                let mut probe = Pt::zeros();
                probe[0] = x1;
                probe[1] = p[0];
                probe[2] = p[1];
                let pw = a_raw.chart.wrap(&probe);
                let araw = a_raw.eval(&pw);
                let qv = q.eval(&pw);
                let da1dx = a_raw.grid.interp(&da1_dx1, &[pw[0], pw[1], pw[2]]);

                let at_t = araw[1] * geo.jt[idx][0] + araw[2] * geo.jt[idx][1];
                let at_y = araw[1] * geo.jy[idx][0] + araw[2] * geo.jy[idx][1];
                let tt1 = tau1[idx];
                let tt_t = taut[idx];
                let tt_y = tauy[idx];
                let d_1 = araw[0] - tt1;
                let d_t = at_t - tt_t;
                let d_y = at_y - tt_y;

                // Transversal divergence data of the mollified pullback.
                let dtaut_dt = dmat(&taut, it, iz, 0);
                let dtauy_dy = dmat(&tauy, it, iz, 1);
                let dtaut_dy = dmat(&taut, it, iz, 1);
                let dtauy_dt = dmat(&tauy, it, iz, 0);

                // Phase data.
                let phi_t = Complex64::new(1.0, 0.0) + 0.5 * hd * y * y;
                let phi_y = hh * y;
                let im_phi = 0.5 * hh.im * y * y;
                let re_phi = t + 0.5 * hh.re * y * y;
                let env = (-mu * im_phi - lambda * re_phi).exp();

                let chi = tube_cutoff(y / dp);
                let chi_p = tube_cutoff_d1(y / dp) / dp;
                let chi_pp = tube_cutoff_d2(y / dp) / (dp * dp);
                if chi == 0.0 && chi_p == 0.0 && chi_pp == 0.0 {
                    continue;
                }

                let pair =
                    |ft: Complex64, fy: Complex64, gt: Complex64, gy: Complex64| -> Complex64 {
                        ft * gt * ginv[0] + (ft * gy + fy * gt) * ginv[1] + fy * gy * ginv[2]
                    };

                let groups = |chi: f64, chi_p: f64, chi_pp: f64| -> [Complex64; 5] {
                    let a_val = an * chi;
                    let a_x = anx * chi;
                    let da_t = ant * chi;
                    let da_y = an * chi_p;
                    let defect = pair(phi_t, phi_y, phi_t, phi_y) - 1.0;
                    let g1 = s * s * defect * a_val * (h * h);
                    let lap_phi = ginv[0] * (0.5 * hdd * y * y)
                        + 2.0 * ginv[1] * (hd * y)
                        + ginv[2] * hh
                        + (divw[0] * phi_t + divw[1] * phi_y) / sd;
                    let g2 = s * (h * h)
                        * (2.0 * a_x
                            - Complex64::i() * 2.0 * pair(phi_t, phi_y, da_t, da_y)
                            - Complex64::i() * lap_phi * a_val
                            + 2.0 * a_val * pair(phi_t, phi_y, tt_t, tt_y)
                            + Complex64::i() * 2.0 * tt1 * a_val);
                    let lap_a = anxx * chi
                        + ginv[0] * antt * chi
                        + 2.0 * ginv[1] * ant * chi_p
                        + ginv[2] * an * chi_pp
                        + (divw[0] * ant * chi + divw[1] * an * chi_p) / sd;
                    // d*(A_tau a) = -(d_x1 + transversal divergence) parts.
                    let trans_div = ginv[0] * dtaut_dt
                        + ginv[1] * (dtauy_dt + dtaut_dy)
                        + ginv[2] * dtauy_dy
                        + (divw[0] * tt_t + divw[1] * tt_y) / sd;
                    let dstar_ata = -(da1dx * a_val + tt1 * a_x)
                        - trans_div * a_val
                        - pair(tt_t, tt_y, da_t, da_y);
                    let a_da = araw[0] * a_x + pair(at_t, at_y, da_t, da_y);
                    let a_a = araw[0] * araw[0] + pair(at_t, at_y, at_t, at_y);
                    let g3 = (h * h)
                        * (-lap_a + Complex64::i() * dstar_ata - Complex64::i() * a_da);
                    let g0th = (h * h) * (a_a + qv) * a_val;
                    let g4 = s
                        * (h * h)
                        * (a_val * pair(phi_t, phi_y, d_t, d_y)
                            + Complex64::i() * 2.0 * d_1 * a_val);
                    [g1, g2, g3, g0th, g4]
                };

                let full = groups(chi, chi_p, chi_pp);
                let plateau = groups(chi, 0.0, 0.0);
                let w0: Complex64 = full.iter().sum();
                let cutoff_part: Complex64 =
                    full.iter().zip(&plateau).map(|(a, b)| a - b).sum();

                // |w1|^2: components i h^2 (A - A_tau) a in chart coordinates,
                // paired with the transversal chart metric.
                let g2x2 = beam.chart.metric(&p);
                let det2 =
                    (g2x2[(0, 0)] * g2x2[(1, 1)] - g2x2[(0, 1)] * g2x2[(1, 0)]).max(1e-300);
                let gi = [
                    g2x2[(1, 1)] / det2,
                    -g2x2[(0, 1)] / det2,
                    g2x2[(0, 0)] / det2,
                ];
                let du = araw[1] - tau_uv[idx].0;
                let dv = araw[2] - tau_uv[idx].1;
                let abs_da_sq = d_1.norm_sqr()
                    + (du * du.conj()).re * gi[0]
                    + 2.0 * (du * dv.conj()).re * gi[1]
                    + (dv * dv.conj()).re * gi[2];
                let a_val_sq = (an * chi).norm_sqr();
                let w1_sq = h.powi(4) * abs_da_sq * a_val_sq;

                let weight = wx * wt * wz * sd * (env * nu) * (env * nu);
                acc[0] += weight * w0.norm_sqr();
                acc[1] += weight * full[0].norm_sqr();
                acc[2] += weight * full[1].norm_sqr();
                acc[3] += weight * full[2].norm_sqr();
                acc[4] += weight * full[3].norm_sqr();
                acc[5] += weight * full[4].norm_sqr();
                acc[6] += weight * cutoff_part.norm_sqr();
                acc[7] += weight * w1_sq;
            }
        }
        acc
    });

    let vol = dx1 * dt * dz / mu.sqrt();
    let mut sums = [0.0f64; 8];
    for s in slice_sums {
        for (k, v) in s.iter().enumerate() {
            sums[k] += v;
        }
    }
    let norm = |v: f64| (v * vol).sqrt();
    let smooth = norm(sums[0]);
    let w1 = norm(sums[7]);
    Ok(ResidualReport {
        h,
        tau: beam.tau,
        bound: smooth + w1 / h,
        smooth_norm: smooth,
        rough_div_over_h: w1 / h,
        eikonal: norm(sums[1]),
        transport: norm(sums[2]),
        second_order: norm(sums[3]),
        zeroth_order: norm(sums[4]),
        rough_l2: norm(sums[5]),
        cutoff: norm(sums[6]),
    })
}
