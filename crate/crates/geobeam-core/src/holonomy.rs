//! Parallel transport along curves, loop holonomy of closed 1-forms,
//! triviality testing, and construction of the gauge function F with a
//! path-independence certificate.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{CoreError, Result};
use crate::fields::SampledOneForm;
use crate::geometry::{pt, Pt};
use crate::grid::integrate_uniform;

/// A sampled C^1 curve: (parameter, point, velocity).
#[derive(Debug, Clone)]
pub struct Curve {
    pub samples: Vec<(f64, Pt, Pt)>,
    pub closed: bool,
}

impl Curve {
    pub fn from_fn<F>(f: F, t_lo: f64, t_hi: f64, n: usize, closed: bool) -> Result<Self>
    where
        F: Fn(f64) -> Pt,
    {
        let n = n.max(8);
        let mut samples = Vec::with_capacity(n);
        let dt = (t_hi - t_lo) / (n - 1) as f64;
        for i in 0..n {
            let t = t_lo + dt * i as f64;
            let h = dt * 1e-3;
            let v = (f(t + h) - f(t - h)) / (2.0 * h);
            samples.push((t, f(t), v));
        }
        let c = Self { samples, closed };
        if closed {
            let a = c.samples.first().unwrap().1;
            let b = c.samples.last().unwrap().1;
            if (a - b).norm() > 1e-10 {
                return Err(CoreError::Contract(format!(
                    "closed curve endpoints differ by {:.2e}",
                    (a - b).norm()
                )));
            }
        }
        Ok(c)
    }

    /// Curve on a periodic chart: the closure check compares endpoints
    /// modulo the wrap lengths.
    pub fn from_fn_wrapped<F>(
        f: F,
        t_lo: f64,
        t_hi: f64,
        n: usize,
        closed: bool,
        lengths: &[f64],
    ) -> Result<Self>
    where
        F: Fn(f64) -> Pt,
    {
        let mut c = Self::from_fn(&f, t_lo, t_hi, n, false)?;
        if closed {
            let a = c.samples.first().unwrap().1;
            let b = c.samples.last().unwrap().1;
            for k in 0..lengths.len().min(2) {
                let d = (a[k] - b[k]).rem_euclid(lengths[k]);
                let d = d.min(lengths[k] - d);
                if d > 1e-10 {
                    return Err(CoreError::Contract(format!(
                        "closed curve endpoints differ by {d:.2e} modulo wrap"
                    )));
                }
            }
            c.closed = true;
        }
        Ok(c)
    }

    /// Circle of given center/radius traversed `turns` times.
    pub fn circle(center: [f64; 2], radius: f64, turns: f64, n: usize) -> Self {
        Self::from_fn(
            |t| {
                pt(&[
                    center[0] + radius * (turns * t).cos(),
                    center[1] + radius * (turns * t).sin(),
                ])
            },
            0.0,
            std::f64::consts::TAU,
            n,
            turns.fract() == 0.0,
        )
        .expect("circle closes")
    }

    pub fn reversed(&self) -> Self {
        let t_hi = self.samples.last().unwrap().0;
        let samples = self
            .samples
            .iter()
            .rev()
            .map(|&(t, x, v)| (t_hi - t, x, -v))
            .collect();
        Self {
            samples,
            closed: self.closed,
        }
    }

    pub fn concat(&self, other: &Curve) -> Result<Self> {
        let (t_end, x_end, _) = *self.samples.last().unwrap();
        let (_, x_start, _) = *other.samples.first().unwrap();
        if (x_end - x_start).norm() > 1e-10 {
            return Err(CoreError::Contract(
                "curves do not meet at the junction".into(),
            ));
        }
        let mut samples = self.samples.clone();
        let t0_other = other.samples[0].0;
        samples.extend(
            other.samples[1..]
                .iter()
                .map(|&(t, x, v)| (t_end + (t - t0_other), x, v)),
        );
        Ok(Self {
            samples,
            closed: false,
        })
    }
}

fn pair_along(a: &SampledOneForm, x: &Pt, v: &Pt) -> Complex64 {
    // Cubic interpolation: line integrals and transports aim at 1e-8-level
    // agreement, which bilinear interpolation cannot reach on these grids.
    let w = a.chart.wrap(x);
    let coords = [w[0], w[1]];
    let c0 = a.grid.interp_cubic(&a.components[0], &coords);
    let c1 = a.grid.interp_cubic(&a.components[1], &coords);
    c0 * v[0] + c1 * v[1]
}

/// Parallel transport s' + i A(gamma, gamma') s = 0 solved by RK4, together
/// with the closed form e^{-i int A} s0; the two must agree to 1e-8. The
/// generator g(t) = A(gamma(t)) . gamma'(t) is resampled with a cubic so the
/// RK4 midpoints carry full order.
pub fn parallel_transport(
    a: &SampledOneForm,
    curve: &Curve,
    s0: Complex64,
) -> Result<(Complex64, Complex64)> {
    let n = curve.samples.len();
    let g: Vec<Complex64> = curve
        .samples
        .iter()
        .map(|(_, x, v)| pair_along(a, x, v))
        .collect();
    if g.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(CoreError::Sampling("transport left the grid".into()));
    }
    // Catmull-Rom value at the midpoint of interval i.
    let g_mid = |i: usize| -> Complex64 {
        let im = i.saturating_sub(1);
        let ip2 = (i + 2).min(n - 1);
        let (p0, p1, p2, p3) = (g[im], g[i], g[i + 1], g[ip2]);
        // t = 1/2 on [p1, p2].
        (p1 + p2) * 0.5625 - (p0 + p3) * 0.0625
    };
    let mut s = s0;
    for i in 0..n - 1 {
        let dt = curve.samples[i + 1].0 - curve.samples[i].0;
        let gm = g_mid(i);
        let f = |gv: Complex64, s: Complex64| -> Complex64 { -Complex64::i() * gv * s };
        let k1 = f(g[i], s);
        let k2 = f(gm, s + k1 * (dt / 2.0));
        let k3 = f(gm, s + k2 * (dt / 2.0));
        let k4 = f(g[i + 1], s + k3 * dt);
        s += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    }
    let closed_form = (-Complex64::i() * line_integral(a, curve)).exp() * s0;
    if (s - closed_form).norm() > 1e-8 * s0.norm().max(1.0) {
        return Err(CoreError::Integration(format!(
            "ODE transport and closed form disagree by {:.2e}",
            (s - closed_form).norm()
        )));
    }
    Ok((s, closed_form))
}

/// int_gamma A by composite quadrature of the sampled pairing.
pub fn line_integral(a: &SampledOneForm, curve: &Curve) -> Complex64 {
    let vals: Vec<Complex64> = curve
        .samples
        .iter()
        .map(|(_, x, v)| pair_along(a, x, v))
        .collect();
    let dt = curve.samples[1].0 - curve.samples[0].0;
    integrate_uniform(&vals, dt)
}

#[derive(Debug, Clone, Serialize)]
pub struct LoopRecord {
    pub loop_id: usize,
    /// int_gamma A / 2 pi.
    pub flux_over_2pi_re: f64,
    pub flux_over_2pi_im: f64,
    pub distance_to_integers: f64,
    pub transport_re: f64,
    pub transport_im: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct HolonomyReport {
    pub records: Vec<LoopRecord>,
    pub trivial: bool,
    pub max_curl: f64,
}

/// Max |d A| over interior nodes (homotopy invariance needs a closed form).
pub fn closedness_defect(a: &SampledOneForm, margin: usize) -> Result<f64> {
    let grid = &a.grid;
    let d01 = grid.deriv_axis(&a.components[1], 0)?;
    let d10 = grid.deriv_axis(&a.components[0], 1)?;
    let mut worst = 0.0f64;
    for i in 0..grid.len() {
        if !grid.is_interior(i, margin) {
            continue;
        }
        let x = pt(&grid.node(i));
        // Stay several cells away from the chart boundary: the stencils
        // must not cross it, and the form's own derivative scale grows
        // toward holes.
        if a.chart.boundary_value(&x) > -6.0 * grid.steps[0] {
            continue;
        }
        worst = worst.max((d01[i] - d10[i]).norm());
    }
    Ok(worst)
}

/// Holonomy of a closed 1-form over a family of loops; trivial iff every
/// loop integral is within `tol * 2 pi` of 2 pi Z.
pub fn loop_holonomy(
    a: &SampledOneForm,
    loops: &[Curve],
    tol: f64,
) -> Result<HolonomyReport> {
    let max_curl = closedness_defect(a, 2)?;
    if max_curl > 1e-6 {
        return Err(CoreError::Contract(format!(
            "form is not closed (max |dA| = {max_curl:.2e}); homotopy invariance void"
        )));
    }
    let mut records = Vec::with_capacity(loops.len());
    let mut trivial = true;
    for (k, l) in loops.iter().enumerate() {
        if !l.closed {
            return Err(CoreError::Contract(format!("loop {k} is not closed")));
        }
        let flux = line_integral(a, l);
        let transport = (-Complex64::i() * flux).exp();
        let ratio = flux / std::f64::consts::TAU;
        let dist = (ratio.re - ratio.re.round()).abs() + ratio.im.abs();
        if dist > tol {
            trivial = false;
        }
        records.push(LoopRecord {
            loop_id: k,
            flux_over_2pi_re: ratio.re,
            flux_over_2pi_im: ratio.im,
            distance_to_integers: dist,
            transport_re: transport.re,
            transport_im: transport.im,
        });
    }
    Ok(HolonomyReport {
        records,
        trivial,
        max_curl,
    })
}

/// Closed sampled 1-form `constant - d psi` with the differential taken by
/// the grid's own 4th-order stencils: the stencils along different axes
/// commute, so the discrete curl vanishes to roundoff, while the samples
/// stay within O(h^4) of the smooth form they represent.
pub fn closed_form_from_potential(
    chart: &crate::geometry::MetricChart,
    grid: &crate::grid::GridSpec,
    constant: [f64; 2],
    psi: &[Complex64],
) -> Result<SampledOneForm> {
    let d0 = grid.deriv_axis(psi, 0)?;
    let d1 = grid.deriv_axis(psi, 1)?;
    let mut out = SampledOneForm::zeros(chart, grid);
    for i in 0..grid.len() {
        out.components[0][i] = Complex64::new(constant[0], 0.0) - d0[i];
        out.components[1][i] = Complex64::new(constant[1], 0.0) - d1[i];
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct GaugeResult {
    /// F on grid nodes (1 outside the domain).
    pub f_values: Vec<Complex64>,
    /// sup |A - (-i F^{-1} dF)| over certificate nodes.
    pub certificate_sup: f64,
    /// sup |F_treeA - F_treeB| between two independently built gauges.
    pub tree_discrepancy: f64,
    /// sup |F - 1| over boundary samples.
    pub boundary_defect: f64,
    /// min |F| over the domain (F must not vanish).
    pub min_modulus: f64,
    /// Grid node actually used as the base point (F = 1 there).
    pub base_point: Pt,
}

#[derive(Debug, Clone)]
pub struct GaugeBuildOptions {
    /// Triviality tolerance for the loop family (units of 2 pi).
    pub tol: f64,
    pub refine_iters: usize,
    /// Nodes closer than this to the boundary are excluded from the
    /// certificate sup (finite differences degrade where the data do).
    pub certificate_margin: f64,
    pub cg: crate::raytransform::GaugeOptions,
}

impl Default for GaugeBuildOptions {
    fn default() -> Self {
        Self {
            tol: 1e-4,
            refine_iters: 6,
            certificate_margin: 0.0,
            cg: crate::raytransform::GaugeOptions {
                cg_tol: 1e-12,
                cg_max_iter: 3000,
            },
        }
    }
}

/// Build F(m') = e^{i int A} from a base point by spanning-tree integration,
/// refined by least-squares potential corrections; requires trivial holonomy
/// over the supplied loop family.
pub fn build_gauge(
    a: &SampledOneForm,
    loops: &[Curve],
    base: &Pt,
    opts: &GaugeBuildOptions,
) -> Result<GaugeResult> {
    let rep = loop_holonomy(a, loops, opts.tol)?;
    if !rep.trivial {
        let bad = rep
            .records
            .iter()
            .max_by(|x, y| {
                x.distance_to_integers
                    .partial_cmp(&y.distance_to_integers)
                    .unwrap()
            })
            .unwrap();
        return Err(CoreError::Gauge(format!(
            "holonomy is non-trivial: loop {} has flux {:.6} * 2pi",
            bad.loop_id, bad.flux_over_2pi_re
        )));
    }
    let f_a = gauge_once(a, base, false, opts)?;
    let f_b = gauge_once(a, base, true, opts)?;
    let grid = &a.grid;
    let mut tree_disc = 0.0f64;
    for i in 0..grid.len() {
        tree_disc = tree_disc.max((f_a.0[i] - f_b.0[i]).norm());
    }
    // Boundary defect.
    let mut boundary_defect = 0.0f64;
    if a.chart.has_boundary_curve() {
        for k in 0..512 {
            let th = std::f64::consts::TAU * k as f64 / 512.0;
            let x = a.chart.boundary_point(th)?;
            let w = a.chart.wrap(&x);
            let coords: Vec<f64> = (0..2).map(|d| w[d]).collect();
            let fv = grid.interp(&f_a.0, &coords);
            boundary_defect = boundary_defect.max((fv - Complex64::new(1.0, 0.0)).norm());
        }
    }
    let mut min_modulus = f64::INFINITY;
    for (i, v) in f_a.0.iter().enumerate() {
        let x = pt(&grid.node(i));
        if a.chart.is_inside(&x) {
            min_modulus = min_modulus.min(v.norm());
        }
    }
    Ok(GaugeResult {
        f_values: f_a.0,
        certificate_sup: f_a.1,
        tree_discrepancy: tree_disc,
        boundary_defect,
        min_modulus,
        base_point: f_a.2,
    })
}

/// One spanning-tree construction plus refinement; `alt_order` flips the
/// neighbor traversal order so the two trees are genuinely different.
fn gauge_once(
    a: &SampledOneForm,
    base: &Pt,
    alt_order: bool,
    opts: &GaugeBuildOptions,
) -> Result<(Vec<Complex64>, f64, Pt)> {
    let grid = &a.grid;
    let (nx, ny) = (grid.shape[0], grid.shape[1]);
    let n = grid.len();
    let inside = |i: usize| -> bool {
        let x = pt(&grid.node(i));
        a.chart.is_inside(&x)
    };
    let dof: Vec<bool> = (0..n).map(inside).collect();

    // Base node: nearest inside node.
    let mut base_node = None;
    let mut best = f64::INFINITY;
    for i in 0..n {
        if !dof[i] {
            continue;
        }
        let x = pt(&grid.node(i));
        let d = (x - base).norm();
        if d < best {
            best = d;
            base_node = Some(i);
        }
    }
    let base_node =
        base_node.ok_or_else(|| CoreError::Gauge("no interior nodes".into()))?;

    // BFS spanning tree with straight-edge Simpson integrals.
    let neighbor = |i: usize, dir: usize| -> Option<usize> {
        let (ix, iy) = (i / ny, i % ny);
        let (dx, dy): (isize, isize) = match dir {
            0 => (1, 0),
            1 => (-1, 0),
            2 => (0, 1),
            _ => (0, -1),
        };
        let wrap = |v: isize, n: usize, periodic: bool| -> Option<usize> {
            if periodic {
                Some(v.rem_euclid(n as isize) as usize)
            } else if v < 0 || v >= n as isize {
                None
            } else {
                Some(v as usize)
            }
        };
        let jx = wrap(ix as isize + dx, nx, grid.periodic[0])?;
        let jy = wrap(iy as isize + dy, ny, grid.periodic[1])?;
        Some(jx * ny + jy)
    };
    let edge_integral = |i: usize, j: usize, dir: usize| -> Complex64 {
        // Straight segment from node i one step along `dir` (wrap-aware).
        let xi = pt(&grid.node(i));
        let step = match dir {
            0 => pt(&[grid.steps[0], 0.0]),
            1 => pt(&[-grid.steps[0], 0.0]),
            2 => pt(&[0.0, grid.steps[1]]),
            _ => pt(&[0.0, -grid.steps[1]]),
        };
        let _ = j;
        let m = 4usize;
        let vals: Vec<Complex64> = (0..=m)
            .map(|k| {
                let x = xi + step * (k as f64 / m as f64);
                pair_along(a, &x, &step)
            })
            .collect();
        integrate_uniform(&vals, 1.0 / m as f64)
    };

    let mut phi = vec![Complex64::new(0.0, 0.0); n];
    let mut seen = vec![false; n];
    seen[base_node] = true;
    let mut queue = std::collections::VecDeque::new();
    queue.push_back(base_node);
    let dirs: [usize; 4] = if alt_order { [3, 2, 1, 0] } else { [0, 1, 2, 3] };
    while let Some(i) = queue.pop_front() {
        for &d in &dirs {
            if let Some(j) = neighbor(i, d) {
                if !dof[j] || seen[j] {
                    continue;
                }
                phi[j] = phi[i] + edge_integral(i, j, d);
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    let mut f: Vec<Complex64> = (0..n)
        .map(|i| {
            if dof[i] && seen[i] {
                (Complex64::i() * phi[i]).exp()
            } else {
                Complex64::new(1.0, 0.0)
            }
        })
        .collect();

    // Refinement: least-squares potential corrections of the residual
    // rho = A - (-i F^{-1} dF) on nodes whose stencils stay inside.
    let stencil_ok: Vec<bool> = (0..n)
        .map(|i| {
            let (ix, iy) = (i / ny, i % ny);
            let ok_axis = |v: isize, n: usize, periodic: bool| -> bool {
                periodic || (v >= 0 && v < n as isize)
            };
            if !dof[i] {
                return false;
            }
            for o in -2isize..=2 {
                if !ok_axis(ix as isize + o, nx, grid.periodic[0])
                    || !ok_axis(iy as isize + o, ny, grid.periodic[1])
                {
                    return false;
                }
                let jx = (ix as isize + o).rem_euclid(nx as isize) as usize;
                let jy = (iy as isize + o).rem_euclid(ny as isize) as usize;
                if !dof[jx * ny + iy] || !dof[ix * ny + jy] {
                    return false;
                }
            }
            true
        })
        .collect();

    // Certificate nodes: full stencils and an extra margin from the
    // boundary where the form's own derivatives blow up the FD error.
    let cert_ok: Vec<bool> = (0..n)
        .map(|i| {
            if !stencil_ok[i] {
                return false;
            }
            let x = pt(&grid.node(i));
            a.chart.boundary_value(&x) <= -opts.certificate_margin
        })
        .collect();

    let mut certificate = f64::INFINITY;
    for _iter in 0..opts.refine_iters {
        let dfx = grid.deriv_axis(&f, 0)?;
        let dfy = grid.deriv_axis(&f, 1)?;
        let mut rho = SampledOneForm::zeros(&a.chart, grid);
        let mut sup = 0.0f64;
        for i in 0..n {
            if !stencil_ok[i] {
                continue;
            }
            let finv = 1.0 / f[i];
            let c0 = a.components[0][i] - (-Complex64::i() * finv * dfx[i]);
            let c1 = a.components[1][i] - (-Complex64::i() * finv * dfy[i]);
            rho.components[0][i] = c0;
            rho.components[1][i] = c1;
            if cert_ok[i] {
                sup = sup.max((c0.norm_sqr() + c1.norm_sqr()).sqrt());
            }
        }
        certificate = sup;
        if sup < 1e-9 {
            break;
        }
        // Potential fit of the residual (exact closed small form).
        let (_, sol) = crate::raytransform::gauge_project(&rho, opts.cg)?;
        // delta phi from the fitted potential: rho - sol = d(p_hat).
        let mut delta = vec![Complex64::new(0.0, 0.0); n];
        // Reconstruct p_hat by re-running the projection pieces: the
        // returned solenoidal part lets us apply the correction directly as
        // exp(i p_hat) with p_hat integrated along the x-axis of rho - sol.
        // Cheaper and exact enough: correct F by the pointwise phase
        // gathered from a BFS over (rho - sol).
        let mut seen2 = vec![false; n];
        seen2[base_node] = true;
        let mut q2 = std::collections::VecDeque::new();
        q2.push_back(base_node);
        let exact = |k: usize| -> [Complex64; 2] {
            [
                rho.components[0][k] - sol.components[0][k],
                rho.components[1][k] - sol.components[1][k],
            ]
        };
        while let Some(i) = q2.pop_front() {
            for &d in &dirs {
                if let Some(j) = neighbor(i, d) {
                    if !dof[j] || seen2[j] {
                        continue;
                    }
                    let (ei, ej) = (exact(i), exact(j));
                    let comp = match d {
                        0 => (ei[0] + ej[0]) * (0.5 * grid.steps[0]),
                        1 => (ei[0] + ej[0]) * (-0.5 * grid.steps[0]),
                        2 => (ei[1] + ej[1]) * (0.5 * grid.steps[1]),
                        _ => (ei[1] + ej[1]) * (-0.5 * grid.steps[1]),
                    };
                    delta[j] = delta[i] + comp;
                    seen2[j] = true;
                    q2.push_back(j);
                }
            }
        }
        for i in 0..n {
            if dof[i] {
                f[i] *= (Complex64::i() * delta[i]).exp();
            }
        }
    }
    Ok((f, certificate, pt(&grid.node(base_node))))
}
