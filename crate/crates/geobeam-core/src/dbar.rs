//! Solve dbar u = g and d u = g for compactly supported plane data by direct
//! quadrature against the Cauchy kernel 1/(pi z) (conjugate kernel for d).
//!
//! The quadrature weight for a source cell depends only on the node offset,
//! so the solve is a discrete convolution: the singular cell integrates to
//! zero exactly (odd kernel over a centered rectangle), near cells use
//! tensor Gauss-Legendre cell integrals, far cells the midpoint value.

use num_complex::Complex64;

use crate::error::{CoreError, Result};
use crate::grid::GridSpec;
use crate::par::{fill_indexed, ExecMode};

const NEAR: isize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CauchyKind {
    /// dbar u = g, dbar = (d_x + i d_y)/2, kernel 1/(pi z).
    Dbar,
    /// d u = g, d = (d_x - i d_y)/2, kernel 1/(pi conj(z)).
    D,
}

/// Complex data on a rectangle in a 2-plane with a declared support box
/// (node index ranges, inclusive).
#[derive(Debug, Clone)]
pub struct PlaneField {
    pub grid: GridSpec,
    pub values: Vec<Complex64>,
    pub support: Option<([usize; 2], [usize; 2])>,
}

impl PlaneField {
    pub fn new(grid: GridSpec, values: Vec<Complex64>) -> Self {
        assert_eq!(grid.dim(), 2);
        assert_eq!(values.len(), grid.len());
        let mut field = Self {
            grid,
            values,
            support: None,
        };
        field.support = field.detect_support(1e-14);
        field
    }

    pub fn zeros(grid: &GridSpec) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
            support: None,
        }
    }

    fn detect_support(&self, tol: f64) -> Option<([usize; 2], [usize; 2])> {
        let (nx, ny) = (self.grid.shape[0], self.grid.shape[1]);
        let mut lo = [usize::MAX; 2];
        let mut hi = [0usize; 2];
        let mut any = false;
        for i in 0..nx {
            for j in 0..ny {
                if self.values[i * ny + j].norm() > tol {
                    any = true;
                    lo[0] = lo[0].min(i);
                    lo[1] = lo[1].min(j);
                    hi[0] = hi[0].max(i);
                    hi[1] = hi[1].max(j);
                }
            }
        }
        any.then_some((lo, hi))
    }
}

fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    // Nodes/weights on [-1, 1] by Newton iteration on Legendre polynomials.
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (mut p0, mut p1) = (1.0, x);
        for k in 2..=n {
            let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
            p0 = p1;
            p1 = p2;
        }
        let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        xs[i] = x;
        ws[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (xs, ws)
}

fn kernel(kind: CauchyKind, zeta: Complex64) -> Complex64 {
    match kind {
        CauchyKind::Dbar => 1.0 / (std::f64::consts::PI * zeta),
        CauchyKind::D => 1.0 / (std::f64::consts::PI * zeta.conj()),
    }
}

/// Offset table W[di, dj] = integral of the kernel over the source cell at
/// offset (di, dj) from the target node.
fn weight_table(grid: &GridSpec, kind: CauchyKind) -> Vec<Complex64> {
    let (nx, ny) = (grid.shape[0], grid.shape[1]);
    let (hx, hy) = (grid.steps[0], grid.steps[1]);
    let (tx, ty) = (2 * nx - 1, 2 * ny - 1);
    let area = hx * hy;
    let (gl_x, gl_w) = gauss_legendre(16);
    let mut table = vec![Complex64::new(0.0, 0.0); tx * ty];
    for (idx, slot) in table.iter_mut().enumerate() {
        let di = (idx / ty) as isize - (nx as isize - 1);
        let dj = (idx % ty) as isize - (ny as isize - 1);
        let dz = Complex64::new(di as f64 * hx, dj as f64 * hy);
        if di == 0 && dj == 0 {
            // Principal value of the odd kernel over a centered cell.
            continue;
        }
        if di.abs() <= NEAR && dj.abs() <= NEAR {
            // Tensor Gauss-Legendre over the source cell (no singularity:
            // the target sits at a different node).
            let mut acc = Complex64::new(0.0, 0.0);
            for (ia, &xa) in gl_x.iter().enumerate() {
                for (ib, &xb) in gl_x.iter().enumerate() {
                    let delta = Complex64::new(0.5 * hx * xa, 0.5 * hy * xb);
                    acc += kernel(kind, dz - delta) * gl_w[ia] * gl_w[ib];
                }
            }
            *slot = acc * (area / 4.0);
        } else {
            *slot = kernel(kind, dz) * area;
        }
    }
    table
}

/// Solve dbar u = g (or d u = g) by convolution with the Cauchy kernel.
pub fn cauchy_solve(g: &PlaneField, kind: CauchyKind, mode: ExecMode) -> Result<PlaneField> {
    let grid = &g.grid;
    let (nx, ny) = (grid.shape[0], grid.shape[1]);
    let Some((lo, hi)) = g.support else {
        // Zero data: zero solution.
        return Ok(PlaneField {
            grid: grid.clone(),
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
            support: None,
        });
    };
    if lo[0] < 2 || lo[1] < 2 || hi[0] + 2 >= nx || hi[1] + 2 >= ny {
        return Err(CoreError::Margin(
            "support touches the grid edge; enlarge the grid".into(),
        ));
    }
    let table = weight_table(grid, kind);
    let ty = 2 * ny - 1;
    let mut values = vec![Complex64::new(0.0, 0.0); grid.len()];
    fill_indexed(mode, &mut values, |flat| {
        let i = flat / ny;
        let j = flat % ny;
        let mut acc = Complex64::new(0.0, 0.0);
        for si in lo[0]..=hi[0] {
            let row = ((i as isize - si as isize) + nx as isize - 1) as usize * ty;
            let base = si * ny;
            for sj in lo[1]..=hi[1] {
                let gv = g.values[base + sj];
                if gv.re == 0.0 && gv.im == 0.0 {
                    continue;
                }
                let w = table[row + ((j as isize - sj as isize) + ny as isize - 1) as usize];
                acc += w * gv;
            }
        }
        acc
    });
    Ok(PlaneField {
        grid: grid.clone(),
        values,
        support: None,
    })
}

/// Finite-difference residual ||D u - g||_{L2(interior)} / ||g||_{L2} where
/// D is the operator matching `kind`.
pub fn residual(u: &PlaneField, g: &PlaneField, kind: CauchyKind) -> Result<f64> {
    let grid = &u.grid;
    let dx = grid.deriv_axis(&u.values, 0)?;
    let dy = grid.deriv_axis(&u.values, 1)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..grid.len() {
        let w = grid.quad_weight(i);
        den += g.values[i].norm_sqr() * w;
        if !grid.is_interior(i, 4) {
            continue;
        }
        let dval = match kind {
            CauchyKind::Dbar => (dx[i] + Complex64::i() * dy[i]) * 0.5,
            CauchyKind::D => (dx[i] - Complex64::i() * dy[i]) * 0.5,
        };
        num += (dval - g.values[i]).norm_sqr() * w;
    }
    if den == 0.0 {
        return Ok(0.0);
    }
    Ok((num / den).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian_data(n: usize) -> PlaneField {
        let grid = GridSpec::new(&[-1.5, -1.5], &[1.5, 1.5], &[n, n]);
        let vals: Vec<Complex64> = (0..grid.len())
            .map(|i| {
                let x = grid.node(i);
                let r2 = (x[0] * x[0] + x[1] * x[1]) / 0.08;
                if r2 < 18.0 {
                    Complex64::new((-r2).exp(), 0.3 * (-r2).exp())
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();
        PlaneField::new(grid, vals)
    }

    #[test]
    fn zero_in_zero_out() {
        let grid = GridSpec::new(&[-1.0, -1.0], &[1.0, 1.0], &[32, 32]);
        let g = PlaneField::zeros(&grid);
        let u = cauchy_solve(&g, CauchyKind::Dbar, ExecMode::Sequential).unwrap();
        assert!(u.values.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn dbar_residual_small_and_first_order() {
        let mut residuals = Vec::new();
        for n in [64usize, 128, 256] {
            let g = gaussian_data(n);
            let u = cauchy_solve(&g, CauchyKind::Dbar, ExecMode::Parallel).unwrap();
            residuals.push(residual(&u, &g, CauchyKind::Dbar).unwrap());
        }
        assert!(
            residuals[2] < 1e-3,
            "relative residual at 256^2: {residuals:?}"
        );
        // At least first-order decay under refinement.
        assert!(residuals[1] < residuals[0] / 1.8, "{residuals:?}");
        assert!(residuals[2] < residuals[1] / 1.8, "{residuals:?}");
    }

    #[test]
    fn d_kernel_residual() {
        let g = gaussian_data(128);
        let u = cauchy_solve(&g, CauchyKind::D, ExecMode::Parallel).unwrap();
        let r = residual(&u, &g, CauchyKind::D).unwrap();
        assert!(r < 5e-3, "relative residual {r}");
    }

    #[test]
    fn linearity() {
        let grid = GridSpec::new(&[-1.0, -1.0], &[1.0, 1.0], &[48, 48]);
        let cut = |r2: f64, width: f64| {
            let s = r2 / width;
            if s < 12.0 {
                (-s).exp()
            } else {
                0.0
            }
        };
        let f1 =
            |x: &[f64]| Complex64::new(cut(x[0] * x[0] + x[1] * x[1], 0.02), 0.0);
        let f2 = |x: &[f64]| {
            Complex64::new(0.0, cut((x[0] - 0.15).powi(2) + x[1] * x[1], 0.015))
        };
        let mk = |f: &dyn Fn(&[f64]) -> Complex64| {
            let vals: Vec<Complex64> = (0..grid.len()).map(|i| f(&grid.node(i))).collect();
            PlaneField::new(grid.clone(), vals)
        };
        let g1 = mk(&f1);
        let g2 = mk(&f2);
        let g12 = mk(&|x: &[f64]| f1(x) + f2(x));
        let u1 = cauchy_solve(&g1, CauchyKind::Dbar, ExecMode::Sequential).unwrap();
        let u2 = cauchy_solve(&g2, CauchyKind::Dbar, ExecMode::Sequential).unwrap();
        let u12 = cauchy_solve(&g12, CauchyKind::Dbar, ExecMode::Sequential).unwrap();
        let mut worst = 0.0f64;
        for i in 0..grid.len() {
            worst = worst.max((u1.values[i] + u2.values[i] - u12.values[i]).norm());
        }
        assert!(worst < 1e-12, "linearity violation {worst}");
    }

    #[test]
    fn margin_violation_is_error() {
        let grid = GridSpec::new(&[-1.0, -1.0], &[1.0, 1.0], &[32, 32]);
        let vals: Vec<Complex64> = (0..grid.len())
            .map(|_| Complex64::new(1.0, 0.0))
            .collect();
        let g = PlaneField::new(grid, vals);
        let err = cauchy_solve(&g, CauchyKind::Dbar, ExecMode::Sequential).unwrap_err();
        assert!(matches!(err, CoreError::Margin(_)));
    }

    #[test]
    fn sup_bound_stable_across_inputs() {
        // ||u||_inf <= C ||g||_inf * diam(supp g) with one fitted C.
        let mut cs = Vec::new();
        for (scale, width) in [(1.0, 0.08), (3.0, 0.08), (1.0, 0.03)] {
            let grid = GridSpec::new(&[-1.5, -1.5], &[1.5, 1.5], &[96, 96]);
            let vals: Vec<Complex64> = (0..grid.len())
                .map(|i| {
                    let x = grid.node(i);
                    let r2 = (x[0] * x[0] + x[1] * x[1]) / width;
                    if r2 < 18.0 {
                        Complex64::new(scale * (-r2).exp(), 0.0)
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                })
                .collect();
            let g = PlaneField::new(grid, vals);
            let u = cauchy_solve(&g, CauchyKind::Dbar, ExecMode::Parallel).unwrap();
            let sup_u = u.values.iter().map(|v| v.norm()).fold(0.0f64, f64::max);
            let sup_g = g.values.iter().map(|v| v.norm()).fold(0.0f64, f64::max);
            let diam = 2.0 * (18.0f64 * width).sqrt();
            cs.push(sup_u / (sup_g * diam));
        }
        let cmax = cs.iter().cloned().fold(0.0f64, f64::max);
        let cmin = cs.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(cmax / cmin < 3.0, "fitted constants vary: {cs:?}");
    }
}
