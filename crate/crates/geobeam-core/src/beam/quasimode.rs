//! Assembly and evaluation of Gaussian beam quasimodes
//! v(x1,t,y) = chi_j(t) e^{i s phi(t,y)} mu^{(n-2)/4} a0(x1,t) chi(y/d')
//! along non-tangential transversal geodesics, with partition-of-unity
//! gluing across segments and branch summation for self-intersections.

use std::sync::Arc;

use num_complex::Complex64;

use crate::dbar::{cauchy_solve, CauchyKind, PlaneField};
use crate::error::{CoreError, Result};
use crate::fields::{mollify_one_form, SampledOneForm, SemiclassicalParams};
use crate::geometry::{
    fermi_coordinates, EntryClassification, FermiFrame, FermiOptions, GeodesicPath, MetricChart,
    Pt,
};
use crate::grid::{integrate_uniform, GridSpec};
use crate::par::ExecMode;

use super::phase::{build_phase, BeamPhase};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BeamKind {
    /// The v_s side (paired with the e^{-s x1} weight).
    Decaying,
    /// The w_s side (paired with the e^{+s x1} weight).
    Growing,
}

/// Smooth step: 0 for u <= 0, 1 for u >= 1.
pub fn smooth_step(u: f64) -> f64 {
    let b = |v: f64| if v > 0.0 { (-1.0 / v).exp() } else { 0.0 };
    let n = b(u);
    let d = n + b(1.0 - u);
    if d == 0.0 {
        0.0
    } else {
        n / d
    }
}

/// Tube cutoff: 1 for |s| <= 1/4, 0 for |s| >= 1/2, smooth in between.
pub fn tube_cutoff(s: f64) -> f64 {
    smooth_step((0.5 - s.abs()) / 0.25)
}

pub fn tube_cutoff_d1(s: f64) -> f64 {
    let h = 1e-6;
    (tube_cutoff(s + h) - tube_cutoff(s - h)) / (2.0 * h)
}

pub fn tube_cutoff_d2(s: f64) -> f64 {
    let h = 1e-5;
    (tube_cutoff(s + h) - 2.0 * tube_cutoff(s) + tube_cutoff(s - h)) / (h * h)
}

#[derive(Debug, Clone)]
pub struct BeamSegment {
    pub t_lo: f64,
    pub t_hi: f64,
    pub phase: BeamPhase,
    f_grid: Vec<f64>,
    f_vals: Vec<Complex64>,
    /// Partition bounds: None at the first/last segment edges.
    chi_lo: Option<f64>,
    chi_hi: Option<f64>,
    chi_width: f64,
}

impl BeamSegment {
    pub fn weight(&self, t: f64) -> f64 {
        let mut w = 1.0;
        if let Some(b) = self.chi_lo {
            w *= smooth_step((t - b) / self.chi_width + 0.5);
        }
        if let Some(b) = self.chi_hi {
            w *= 1.0 - smooth_step((t - b) / self.chi_width + 0.5);
        }
        w
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.t_lo - 1e-12 && t <= self.t_hi + 1e-12
    }

    pub fn f_at(&self, t: f64) -> Complex64 {
        let n = self.f_grid.len();
        if t <= self.f_grid[0] {
            return self.f_vals[0];
        }
        if t >= self.f_grid[n - 1] {
            return self.f_vals[n - 1];
        }
        let dt = self.f_grid[1] - self.f_grid[0];
        let i = (((t - self.f_grid[0]) / dt) as usize).min(n - 2);
        let f = (t - self.f_grid[i]) / dt;
        self.f_vals[i] * (1.0 - f) + self.f_vals[i + 1] * f
    }
}

type EtaFn = Arc<dyn Fn(f64, f64) -> Complex64 + Send + Sync>;

#[derive(Clone)]
pub struct GaussianBeam {
    pub chart: MetricChart,
    pub geo: GeodesicPath,
    pub params: SemiclassicalParams,
    pub kind: BeamKind,
    pub delta_prime: f64,
    pub tau: f64,
    pub sigma: f64,
    pub frame: FermiFrame,
    /// Transport phase on the (x1, t) plane.
    pub phi_tau: PlaneField,
    /// Mollified potential used in the construction (3D product grid).
    pub a_tau: SampledOneForm,
    pub eta: EtaFn,
    pub segments: Vec<BeamSegment>,
    /// Transversal co-dimension (n - 2).
    pub n_trans: usize,
    /// x1 extent of the manifold.
    pub x1_range: (f64, f64),
}

impl std::fmt::Debug for GaussianBeam {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GaussianBeam")
            .field("kind", &self.kind)
            .field("h", &self.params.h())
            .field("tau", &self.tau)
            .field("segments", &self.segments.len())
            .finish()
    }
}

#[derive(Debug, Clone)]
pub struct BeamOptions {
    /// Tube half-width delta'.
    pub delta_prime: f64,
    /// tau = h^sigma; the admissible range is (0, 1/2).
    pub sigma: f64,
    /// Initial Hessian and its anchor time.
    pub h0: Complex64,
    pub t0: f64,
    /// Plane grid for the transport phase: x1 padding and node counts.
    pub plane_nx: usize,
    pub plane_nt: usize,
    pub plane_margin: f64,
    /// Riccati nodes per unit length.
    pub ric_nodes: usize,
    /// Segment breakpoints for glued construction (interior times).
    pub breakpoints: Vec<f64>,
    pub chi_width: f64,
    pub fermi: FermiOptions,
    pub mode: ExecMode,
}

impl Default for BeamOptions {
    fn default() -> Self {
        Self {
            delta_prime: 1.0,
            sigma: 0.4,
            h0: Complex64::new(0.0, 1.0),
            t0: 0.0,
            plane_nx: 96,
            plane_nt: 128,
            plane_margin: 0.6,
            ric_nodes: 1200,
            breakpoints: Vec::new(),
            chi_width: 0.2,
            fermi: FermiOptions::default(),
            mode: ExecMode::Parallel,
        }
    }
}

/// Normalization constant: f(t0) real with
/// e^{2 f(t0)} pi^{(n-2)/2} / sqrt(det Im H(t0)) = 1.
pub fn normalization_f0(phase: &BeamPhase, t0: f64, n_trans: usize) -> Complex64 {
    let det_im = phase.ric.h_at(t0).map(|z| z.im).determinant();
    Complex64::new(
        0.25 * det_im.ln() - 0.25 * (n_trans as f64) * std::f64::consts::PI.ln(),
        0.0,
    )
}

/// Build the quasimode of the requested kind along a non-tangential
/// geodesic. `a` is the (continuous) magnetic potential on the 3D product
/// grid; it is mollified at tau = h^sigma internally.
pub fn assemble_quasimode(
    chart: &MetricChart,
    geo: &GeodesicPath,
    a: &SampledOneForm,
    params: &SemiclassicalParams,
    kind: BeamKind,
    x1_range: (f64, f64),
    eta: Option<EtaFn>,
    opts: &BeamOptions,
) -> Result<GaussianBeam> {
    if geo.classification != EntryClassification::NonTangential {
        return Err(CoreError::Contract(
            "quasimodes require a non-tangential geodesic".into(),
        ));
    }
    if !(opts.sigma > 0.0 && opts.sigma < 0.5) {
        return Err(CoreError::Parameter("sigma must lie in (0, 1/2)".into()));
    }
    let h = params.h();
    let tau = h.powf(opts.sigma);
    let length = geo.exit_time;
    let frame = fermi_coordinates(chart, geo, opts.delta_prime, &opts.fermi)?;

    // Mollify the potential once at the beam's scale; identically zero
    // potentials are their own mollification at any scale.
    let a_is_zero = a
        .components
        .iter()
        .all(|c| c.iter().all(|v| v.re == 0.0 && v.im == 0.0));
    let a_tau = if a_is_zero {
        a.clone()
    } else {
        mollify_one_form(a, tau, opts.mode)?
    };

    // Transport phase on the (x1, t) plane.
    let plane = GridSpec::new(
        &[
            x1_range.0 - opts.plane_margin,
            -opts.plane_margin,
        ],
        &[
            x1_range.1 + opts.plane_margin,
            length + opts.plane_margin,
        ],
        &[opts.plane_nx, opts.plane_nt],
    );
    let mut rhs = vec![Complex64::new(0.0, 0.0); plane.len()];
    for (i, slot) in rhs.iter_mut().enumerate() {
        let node = plane.node(i);
        let (x1, t) = (node[0], node[1]);
        if !(0.0..=length).contains(&t) {
            continue;
        }
        let p = frame.chart_map(t, 0.0);
        let (jt, _) = frame.tangents(t, 0.0);
        let mut probe = Pt::zeros();
        probe[0] = x1;
        probe[1] = p[0];
        probe[2] = p[1];
        let comps = a_tau.eval(&a_tau.chart.wrap(&probe));
        let a1 = comps[0];
        let at = comps[1] * jt[0] + comps[2] * jt[1];
        *slot = match kind {
            // d Phi = -(i A1 + A_t)/2 for the decaying side,
            // dbar Phi = (-i conj(A1) + conj(A_t))/2 for the growing side.
            BeamKind::Decaying => -(Complex64::i() * a1 + at) * 0.5,
            BeamKind::Growing => (-Complex64::i() * a1.conj() + at.conj()) * 0.5,
        };
    }
    let rhs_field = PlaneField::new(plane.clone(), rhs);
    let phi_tau = if rhs_field.support.is_none() {
        PlaneField::zeros(&plane)
    } else {
        let kernel = match kind {
            BeamKind::Decaying => CauchyKind::D,
            BeamKind::Growing => CauchyKind::Dbar,
        };
        cauchy_solve(&rhs_field, kernel, opts.mode)?
    };

    // Segments: first built from the anchor data, continuations matched at
    // the overlap midpoints.
    let mut bounds = vec![0.0];
    for &b in &opts.breakpoints {
        if b <= 0.0 || b >= length {
            return Err(CoreError::Contract(
                "breakpoints must be interior to (0, L)".into(),
            ));
        }
        bounds.push(b);
    }
    bounds.push(length);
    let overlap = opts.chi_width.max(0.05 * length);
    let n_seg = bounds.len() - 1;
    let mut segments: Vec<BeamSegment> = Vec::with_capacity(n_seg);
    for j in 0..n_seg {
        let t_lo = (bounds[j] - overlap).max(0.0);
        let t_hi = (bounds[j + 1] + overlap).min(length);
        let nodes = (length * opts.ric_nodes as f64).ceil() as usize + 9;
        let (h0, t0, f_init) = if j == 0 {
            (opts.h0, opts.t0.clamp(t_lo, t_hi), None)
        } else {
            // Matching conditions at t0'; snap to the nearest stored node of
            // the previous solve so the continuation data carry no
            // interpolation error.
            let prev = &segments[j - 1];
            let grid = &prev.phase.ric.t_grid;
            let k = grid
                .iter()
                .enumerate()
                .min_by(|a, b| {
                    (a.1 - bounds[j])
                        .abs()
                        .partial_cmp(&(b.1 - bounds[j]).abs())
                        .unwrap()
                })
                .map(|(k, _)| k)
                .unwrap();
            let t_match = grid[k];
            (
                prev.phase.ric.h_vals[k][(0, 0)],
                t_match,
                Some(prev.f_vals[k]),
            )
        };
        let phase = build_phase(&frame, h0, t0, nodes)?;
        // f(t) = f(t0) - (1/2) int_{t0}^t tr H.
        let f0 = match f_init {
            Some(v) => v,
            None => normalization_f0(&phase, t0, 1),
        };
        let f_grid: Vec<f64> = phase.ric.t_grid.clone();
        let trh: Vec<Complex64> = f_grid.iter().map(|&t| phase.ric.trace_h_at(t)).collect();
        let dt = f_grid[1] - f_grid[0];
        let i0 = f_grid
            .iter()
            .position(|&t| (t - t0).abs() <= 0.5 * dt + 1e-12)
            .unwrap_or(0);
        let mut f_vals = vec![Complex64::new(0.0, 0.0); f_grid.len()];
        f_vals[i0] = f0 - 0.5 * (trh[i0] * (f_grid[i0] - t0));
        for i in i0 + 1..f_grid.len() {
            f_vals[i] = f_vals[i - 1] - 0.25 * dt * (trh[i - 1] + trh[i]);
        }
        for i in (0..i0).rev() {
            f_vals[i] = f_vals[i + 1] + 0.25 * dt * (trh[i] + trh[i + 1]);
        }
        segments.push(BeamSegment {
            t_lo,
            t_hi,
            phase,
            f_grid,
            f_vals,
            chi_lo: if j == 0 { None } else { Some(bounds[j]) },
            chi_hi: if j + 1 == n_seg { None } else { Some(bounds[j + 1]) },
            chi_width: opts.chi_width,
        });
    }

    Ok(GaussianBeam {
        chart: chart.clone(),
        geo: geo.clone(),
        params: *params,
        kind,
        delta_prime: opts.delta_prime,
        tau,
        sigma: opts.sigma,
        frame,
        phi_tau,
        a_tau,
        eta: eta.unwrap_or_else(|| Arc::new(|_, _| Complex64::new(1.0, 0.0))),
        segments,
        n_trans: 1,
        x1_range,
    })
}


impl GaussianBeam {
    pub fn mu_pow(&self) -> f64 {
        self.params.mu().powf(self.n_trans as f64 / 4.0)
    }

    /// Amplitude a0(x1, t) of one segment.
    pub fn a0(&self, seg: &BeamSegment, x1: f64, t: f64) -> Complex64 {
        let phi = self.phi_tau.grid.interp(&self.phi_tau.values, &[x1, t]);
        let f = seg.f_at(t);
        let eta = match self.kind {
            BeamKind::Decaying => (self.eta)(x1, t),
            BeamKind::Growing => Complex64::new(1.0, 0.0),
        };
        (phi + f).exp() * eta
    }

    /// e^{i s phi}; the exponent has non-positive real part mu Im phi >= 0
    /// so the evaluation is always stable.
    pub fn phase_factor(&self, seg: &BeamSegment, t: f64, y: f64) -> Complex64 {
        let phi = seg.phase.phi(t, y);
        (Complex64::i() * self.params.s() * phi).exp()
    }

    /// Quasimode value at (x1, transversal chart point), summing partition
    /// segments and tube branches.
    pub fn eval(&self, x1: f64, p: &Pt) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (t, y) in self.frame.inverse_all(p) {
            for seg in &self.segments {
                if !seg.contains(t) {
                    continue;
                }
                let w = seg.weight(t);
                if w == 0.0 {
                    continue;
                }
                let cut = tube_cutoff(y / self.delta_prime);
                if cut == 0.0 {
                    continue;
                }
                acc += self.phase_factor(seg, t, y)
                    * self.a0(seg, x1, t)
                    * (w * cut * self.mu_pow());
            }
        }
        acc
    }

    /// Per-branch values (t, combined segment value) used for separating
    /// diagonal and mixed contributions at self-intersections.
    pub fn eval_branches(&self, x1: f64, p: &Pt) -> Vec<(f64, Complex64)> {
        let mut out = Vec::new();
        for (t, y) in self.frame.inverse_all(p) {
            let mut acc = Complex64::new(0.0, 0.0);
            for seg in &self.segments {
                if !seg.contains(t) {
                    continue;
                }
                let w = seg.weight(t);
                let cut = tube_cutoff(y / self.delta_prime);
                if w == 0.0 || cut == 0.0 {
                    continue;
                }
                acc += self.phase_factor(seg, t, y)
                    * self.a0(seg, x1, t)
                    * (w * cut * self.mu_pow());
            }
            out.push((t, acc));
        }
        out
    }

    /// L2 norm over the transversal manifold of the x1-slice, by tube
    /// quadrature with the Gaussian substitution z = sqrt(mu) y.
    pub fn slice_l2_norm(&self, x1: f64) -> f64 {
        let mu = self.params.mu();
        let length = self.geo.exit_time;
        let nt = 400;
        let nz = 161;
        let zmax = self.z_max();
        let dt = length / (nt - 1) as f64;
        let dz = 2.0 * zmax / (nz - 1) as f64;
        let mut acc = 0.0;
        for i in 0..nt {
            let t = i as f64 * dt;
            let wt = if i == 0 || i == nt - 1 { 0.5 } else { 1.0 };
            for k in 0..nz {
                let z = -zmax + k as f64 * dz;
                let wz = if k == 0 || k == nz - 1 { 0.5 } else { 1.0 };
                let y = z / mu.sqrt();
                let p = self.frame.chart_map(t, y);
                if !self.chart.is_inside(&p) {
                    continue;
                }
                let mut v = Complex64::new(0.0, 0.0);
                for seg in &self.segments {
                    if !seg.contains(t) {
                        continue;
                    }
                    let w = seg.weight(t);
                    if w == 0.0 {
                        continue;
                    }
                    v += self.phase_factor(seg, t, y)
                        * self.a0(seg, x1, t)
                        * (w * tube_cutoff(y / self.delta_prime) * self.mu_pow());
                }
                let sq = self.frame.sqrt_det_frame(t, y);
                acc += v.norm_sqr() * sq * wt * wz;
            }
        }
        (acc * dt * dz / mu.sqrt()).sqrt()
    }

    /// Gaussian-integral prediction for the squared slice norm:
    /// int_0^L |a0(x1, t)|^2 e^{-2 lambda t} sqrt(pi / Im H) dt.
    pub fn slice_l2_prediction(&self, x1: f64) -> f64 {
        let seg = &self.segments[0];
        let length = self.geo.exit_time;
        let n = 801;
        let dt = length / (n - 1) as f64;
        let lam = self.params.lambda();
        let vals: Vec<Complex64> = (0..n)
            .map(|i| {
                let t = i as f64 * dt;
                let a0 = self.a0(seg, x1, t);
                let im_h = seg.phase.h_scalar(t).im;
                Complex64::new(
                    a0.norm_sqr() * (std::f64::consts::PI / im_h).sqrt()
                        * (-2.0 * lam * t).exp(),
                    0.0,
                )
            })
            .collect();
        integrate_uniform(&vals, dt).re.sqrt()
    }

    /// z-truncation radius for tube quadrature.
    pub fn z_max(&self) -> f64 {
        let mu = self.params.mu();
        (mu.sqrt() * self.delta_prime * 0.5).min(9.0)
    }

    /// L2 norm of the slice trace on the transversal boundary.
    pub fn boundary_trace_norm(&self, x1: f64) -> Result<f64> {
        let n = 2048;
        let mut acc = 0.0;
        let dth = std::f64::consts::TAU / n as f64;
        for i in 0..n {
            let th = i as f64 * dth;
            let x = self.chart.boundary_point(th)?;
            let xp = self.chart.boundary_point(th + 1e-5)?;
            let xm = self.chart.boundary_point(th - 1e-5)?;
            let speed = self.chart.norm(&x, &((xp - xm) / 2e-5));
            let v = self.eval(x1, &x);
            acc += v.norm_sqr() * speed * dth;
        }
        Ok(acc.sqrt())
    }

    /// Max disagreement of adjacent segments on their overlaps (phase and
    /// amplitude values must match by the gluing conditions).
    pub fn overlap_agreement(&self) -> f64 {
        let mut worst = 0.0f64;
        for w in self.segments.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            let lo = b.t_lo.max(a.t_lo);
            let hi = a.t_hi.min(b.t_hi);
            if hi <= lo {
                continue;
            }
            for i in 0..=32 {
                let t = lo + (hi - lo) * i as f64 / 32.0;
                for &y in &[0.0, 0.1 * self.delta_prime, 0.2 * self.delta_prime] {
                    let pa = a.phase.phi(t, y);
                    let pb = b.phase.phi(t, y);
                    worst = worst.max((pa - pb).norm());
                }
                worst = worst.max((a.f_at(t) - b.f_at(t)).norm());
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{integrate_geodesic, pt, GeodesicOptions};

    fn flat_setup(h: f64) -> (MetricChart, GeodesicPath, SampledOneForm, SemiclassicalParams) {
        let chart = MetricChart::euclidean_disk(1.0);
        let geo = integrate_geodesic(
            &chart,
            &pt(&[1.0, 0.0]),
            &pt(&[-1.0, 0.0]),
            &GeodesicOptions::default(),
        )
        .unwrap();
        let prod = MetricChart::product(&chart, -1.0, 1.0);
        let agrid = GridSpec::new(&[-1.2, -1.2, -1.2], &[1.2, 1.2, 1.2], &[33, 33, 33]);
        let a = SampledOneForm::zeros(&prod, &agrid);
        let params = SemiclassicalParams::new(h, 0.0).unwrap();
        (chart, geo, a, params)
    }

    #[test]
    fn zero_potential_amplitude_reduces_to_f_factor() {
        let (chart, geo, a, params) = flat_setup(0.05);
        let opts = BeamOptions {
            delta_prime: 4.0,
            ..Default::default()
        };
        let beam = assemble_quasimode(
            &chart,
            &geo,
            &a,
            &params,
            BeamKind::Decaying,
            (-1.0, 1.0),
            None,
            &opts,
        )
        .unwrap();
        // Phi_tau = 0, so a0 = e^{f(t)}; the normalization identity holds
        // exactly at t0.
        let seg = &beam.segments[0];
        let f0 = seg.f_at(0.0);
        let det_im = seg.phase.h_scalar(0.0).im;
        let id = (2.0 * f0.re).exp() * std::f64::consts::PI.powf(0.5) / det_im.sqrt();
        assert!((id - 1.0).abs() < 1e-10, "normalization identity {id}");
        let phi = beam
            .phi_tau
            .grid
            .interp(&beam.phi_tau.values, &[0.3, 0.9]);
        assert!(phi.norm() < 1e-14);
    }

    #[test]
    fn slice_norm_matches_gaussian_prediction() {
        let (chart, geo, a, params) = flat_setup(0.05);
        let opts = BeamOptions {
            delta_prime: 4.0,
            ..Default::default()
        };
        let beam = assemble_quasimode(
            &chart,
            &geo,
            &a,
            &params,
            BeamKind::Decaying,
            (-1.0, 1.0),
            None,
            &opts,
        )
        .unwrap();
        let measured = beam.slice_l2_norm(0.0);
        let predicted = beam.slice_l2_prediction(0.0);
        let ratio = measured / predicted;
        assert!(
            (ratio - 1.0).abs() < 0.1,
            "measured {measured}, predicted {predicted}"
        );
        // For the unit-disk diameter with H0 = i at t0 = 0 the prediction
        // itself equals sqrt(L) = sqrt(2) exactly.
        assert!((predicted - 2.0f64.sqrt()).abs() < 1e-3, "{predicted}");
    }

    #[test]
    fn beam_vanishes_outside_tube_and_norm_stable_in_h() {
        let (chart, geo, a, _) = flat_setup(0.05);
        let opts = BeamOptions {
            delta_prime: 0.4,
            ..Default::default()
        };
        let mut norms = Vec::new();
        for h in [0.1, 0.05, 0.025] {
            let params = SemiclassicalParams::new(h, 0.0).unwrap();
            let beam = assemble_quasimode(
                &chart,
                &geo,
                &a,
                &params,
                BeamKind::Decaying,
                (-1.0, 1.0),
                None,
                &opts,
            )
            .unwrap();
            // Outside the delta' tube the beam vanishes identically.
            let outside = beam.eval(0.0, &pt(&[0.0, 0.3]));
            assert_eq!(outside.norm(), 0.0);
            norms.push(beam.slice_l2_norm(0.1));
        }
        let max = norms.iter().cloned().fold(0.0f64, f64::max);
        let min = norms.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(max / min < 1.5, "slice norms vary: {norms:?}");
    }

    #[test]
    fn glued_segments_agree_on_overlaps() {
        let (chart, geo, a, params) = flat_setup(0.05);
        let opts = BeamOptions {
            delta_prime: 4.0,
            breakpoints: vec![0.8, 1.3],
            ..Default::default()
        };
        let beam = assemble_quasimode(
            &chart,
            &geo,
            &a,
            &params,
            BeamKind::Decaying,
            (-1.0, 1.0),
            None,
            &opts,
        )
        .unwrap();
        assert_eq!(beam.segments.len(), 3);
        let agree = beam.overlap_agreement();
        assert!(agree < 1e-8, "overlap disagreement {agree}");
        // Glued evaluation equals the single-segment beam.
        let single = assemble_quasimode(
            &chart,
            &geo,
            &a,
            &params,
            BeamKind::Decaying,
            (-1.0, 1.0),
            None,
            &BeamOptions {
                delta_prime: 4.0,
                ..Default::default()
            },
        )
        .unwrap();
        let mut worst = 0.0f64;
        for &t in &[0.1, 0.75, 1.0, 1.6] {
            for &y in &[0.0, 0.15] {
                let p = beam.frame.chart_map(t, y);
                let d = (beam.eval(0.2, &p) - single.eval(0.2, &p)).norm();
                worst = worst.max(d);
            }
        }
        assert!(worst < 1e-7, "glued vs single mismatch {worst}");
    }

    #[test]
    fn boundary_trace_stays_order_one() {
        let (chart, geo, a, _) = flat_setup(0.05);
        let opts = BeamOptions {
            delta_prime: 4.0,
            ..Default::default()
        };
        let mut traces = Vec::new();
        for h in [0.1, 0.05, 0.025] {
            let params = SemiclassicalParams::new(h, 0.0).unwrap();
            let beam = assemble_quasimode(
                &chart,
                &geo,
                &a,
                &params,
                BeamKind::Decaying,
                (-1.0, 1.0),
                None,
                &opts,
            )
            .unwrap();
            traces.push(beam.boundary_trace_norm(0.0).unwrap());
        }
        let max = traces.iter().cloned().fold(0.0f64, f64::max);
        let min = traces.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(max / min < 3.0, "boundary traces vary: {traces:?}");
    }
}
