//! Uniform tensor grids with multilinear interpolation, 4th-order finite
//! differences and trapezoidal quadrature. All sampled fields in this crate
//! live on a [`GridSpec`] with flat row-major storage (last axis fastest).

use num_complex::Complex64;

use crate::error::{CoreError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub mins: Vec<f64>,
    pub steps: Vec<f64>,
    pub shape: Vec<usize>,
    /// Axes flagged periodic wrap their stencils and interpolation. A
    /// periodic axis of `n` nodes covers `[min, min + n*step)`.
    pub periodic: Vec<bool>,
}

impl GridSpec {
    /// Grid with `shape[k]` nodes spanning `[lo[k], hi[k]]` inclusive.
    pub fn new(lo: &[f64], hi: &[f64], shape: &[usize]) -> Self {
        assert_eq!(lo.len(), hi.len());
        assert_eq!(lo.len(), shape.len());
        let steps = lo
            .iter()
            .zip(hi)
            .zip(shape)
            .map(|((a, b), &n)| {
                assert!(n >= 2, "axis needs at least 2 nodes");
                (b - a) / (n - 1) as f64
            })
            .collect();
        Self {
            mins: lo.to_vec(),
            steps,
            shape: shape.to_vec(),
            periodic: vec![false; lo.len()],
        }
    }

    /// Periodic grid covering `[lo[k], lo[k]+len[k])` with `shape[k]` nodes.
    pub fn new_periodic(lo: &[f64], len: &[f64], shape: &[usize]) -> Self {
        let steps = len
            .iter()
            .zip(shape)
            .map(|(l, &n)| l / n as f64)
            .collect();
        Self {
            mins: lo.to_vec(),
            steps,
            shape: shape.to_vec(),
            periodic: vec![true; lo.len()],
        }
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn axis_coord(&self, axis: usize, i: usize) -> f64 {
        self.mins[axis] + self.steps[axis] * i as f64
    }

    /// Chart coordinates of a flat node index.
    pub fn node(&self, flat: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        let mut rem = flat;
        for axis in (0..self.dim()).rev() {
            let n = self.shape[axis];
            x[axis] = self.axis_coord(axis, rem % n);
            rem /= n;
        }
        x
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        let mut idx = 0;
        for (axis, &i) in multi.iter().enumerate() {
            idx = idx * self.shape[axis] + i;
        }
        idx
    }

    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        let mut m = vec![0; self.dim()];
        let mut rem = flat;
        for axis in (0..self.dim()).rev() {
            m[axis] = rem % self.shape[axis];
            rem /= self.shape[axis];
        }
        m
    }

    /// True if `x` lies inside the covered box (within half a step of the
    /// last node on non-periodic axes).
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().enumerate().all(|(axis, &v)| {
            if self.periodic[axis] {
                true
            } else {
                let lo = self.mins[axis];
                let hi = self.axis_coord(axis, self.shape[axis] - 1);
                v >= lo - 1e-12 && v <= hi + 1e-12
            }
        })
    }

    fn locate(&self, axis: usize, v: f64) -> (usize, usize, f64) {
        let n = self.shape[axis];
        let t = (v - self.mins[axis]) / self.steps[axis];
        if self.periodic[axis] {
            let tw = t.rem_euclid(n as f64);
            let i0 = tw.floor() as usize % n;
            let frac = tw - tw.floor();
            ((i0) % n, (i0 + 1) % n, frac)
        } else {
            let tc = t.clamp(0.0, (n - 1) as f64);
            let i0 = (tc.floor() as usize).min(n - 2);
            (i0, i0 + 1, tc - i0 as f64)
        }
    }

    /// Multilinear interpolation of complex nodal values at `x`.
    pub fn interp(&self, values: &[Complex64], x: &[f64]) -> Complex64 {
        debug_assert_eq!(values.len(), self.len());
        let d = self.dim();
        let mut corners: Vec<(usize, usize, f64)> = Vec::with_capacity(d);
        for axis in 0..d {
            corners.push(self.locate(axis, x[axis]));
        }
        let mut acc = Complex64::new(0.0, 0.0);
        let n_corners = 1usize << d;
        let mut multi = vec![0usize; d];
        for c in 0..n_corners {
            let mut w = 1.0;
            for (axis, item) in corners.iter().enumerate() {
                let (i0, i1, f) = *item;
                if (c >> axis) & 1 == 0 {
                    multi[axis] = i0;
                    w *= 1.0 - f;
                } else {
                    multi[axis] = i1;
                    w *= f;
                }
            }
            if w != 0.0 {
                acc += values[self.flat_index(&multi)] * w;
            }
        }
        acc
    }

    /// Multilinear interpolation of real nodal values at `x`.
    pub fn interp_real(&self, values: &[f64], x: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        let d = self.dim();
        let mut acc = 0.0;
        let mut multi = vec![0usize; d];
        let corners: Vec<(usize, usize, f64)> =
            (0..d).map(|axis| self.locate(axis, x[axis])).collect();
        for c in 0..(1usize << d) {
            let mut w = 1.0;
            for (axis, item) in corners.iter().enumerate() {
                let (i0, i1, f) = *item;
                if (c >> axis) & 1 == 0 {
                    multi[axis] = i0;
                    w *= 1.0 - f;
                } else {
                    multi[axis] = i1;
                    w *= f;
                }
            }
            if w != 0.0 {
                acc += values[self.flat_index(&multi)] * w;
            }
        }
        acc
    }

    /// Tensor Catmull-Rom cubic interpolation of complex nodal values;
    /// clamped at non-periodic edges, wrapped on periodic axes.
    pub fn interp_cubic(&self, values: &[Complex64], x: &[f64]) -> Complex64 {
        debug_assert_eq!(values.len(), self.len());
        let d = self.dim();
        let mut idx = Vec::with_capacity(d);
        let mut wts = Vec::with_capacity(d);
        for axis in 0..d {
            let n = self.shape[axis];
            let t = (x[axis] - self.mins[axis]) / self.steps[axis];
            let (i, u) = if self.periodic[axis] {
                let tw = t.rem_euclid(n as f64);
                (tw.floor() as isize, tw - tw.floor())
            } else {
                let tc = t.clamp(0.0, (n - 1) as f64);
                let i = (tc.floor() as isize).min(n as isize - 2);
                (i, tc - i as f64)
            };
            let grab = move |j: isize, n: usize, periodic: bool| -> usize {
                if periodic {
                    j.rem_euclid(n as isize) as usize
                } else {
                    j.clamp(0, n as isize - 1) as usize
                }
            };
            idx.push([
                grab(i - 1, n, self.periodic[axis]),
                grab(i, n, self.periodic[axis]),
                grab(i + 1, n, self.periodic[axis]),
                grab(i + 2, n, self.periodic[axis]),
            ]);
            let u2 = u * u;
            let u3 = u2 * u;
            wts.push([
                0.5 * (-u + 2.0 * u2 - u3),
                0.5 * (2.0 - 5.0 * u2 + 3.0 * u3),
                0.5 * (u + 4.0 * u2 - 3.0 * u3),
                0.5 * (u3 - u2),
            ]);
        }
        let mut acc = Complex64::new(0.0, 0.0);
        let combos = 4usize.pow(d as u32);
        let mut multi = vec![0usize; d];
        for c in 0..combos {
            let mut w = 1.0;
            let mut rem = c;
            for axis in 0..d {
                let pick = rem % 4;
                rem /= 4;
                multi[axis] = idx[axis][pick];
                w *= wts[axis][pick];
            }
            if w != 0.0 {
                acc += values[self.flat_index(&multi)] * w;
            }
        }
        acc
    }

    /// 4th-order partial derivative along `axis` at every node. Central in
    /// the interior, one-sided 5-point stencils at non-periodic edges.
    pub fn deriv_axis(&self, values: &[Complex64], axis: usize) -> Result<Vec<Complex64>> {
        let n = self.shape[axis];
        if n < 5 {
            return Err(CoreError::Resolution(format!(
                "axis {axis} has {n} nodes, need at least 5 for 4th-order stencils"
            )));
        }
        let h = self.steps[axis];
        let stride = self.axis_stride(axis);
        let mut out = vec![Complex64::new(0.0, 0.0); values.len()];
        let periodic = self.periodic[axis];
        for flat in 0..values.len() {
            let i = (flat / stride) % n;
            let base = flat - i * stride;
            let at = |j: isize| -> Complex64 {
                let jj = if periodic {
                    (j.rem_euclid(n as isize)) as usize
                } else {
                    j as usize
                };
                values[base + jj * stride]
            };
            let ii = i as isize;
            let v = if periodic || (2..n - 2).contains(&i) {
                (-at(ii + 2) + at(ii + 1) * 8.0 - at(ii - 1) * 8.0 + at(ii - 2)) / (12.0 * h)
            } else if i == 0 {
                (at(0) * -25.0 + at(1) * 48.0 - at(2) * 36.0 + at(3) * 16.0 - at(4) * 3.0)
                    / (12.0 * h)
            } else if i == 1 {
                (at(0) * -3.0 - at(1) * 10.0 + at(2) * 18.0 - at(3) * 6.0 + at(4)) / (12.0 * h)
            } else if i == n - 2 {
                let m = (n - 1) as isize;
                -(at(m) * -3.0 - at(m - 1) * 10.0 + at(m - 2) * 18.0 - at(m - 3) * 6.0
                    + at(m - 4))
                    / (12.0 * h)
            } else {
                let m = (n - 1) as isize;
                -(at(m) * -25.0 + at(m - 1) * 48.0 - at(m - 2) * 36.0 + at(m - 3) * 16.0
                    - at(m - 4) * 3.0)
                    / (12.0 * h)
            };
            out[flat] = v;
        }
        Ok(out)
    }

    fn axis_stride(&self, axis: usize) -> usize {
        self.shape[axis + 1..].iter().product()
    }

    /// Trapezoidal quadrature weight of a node (product over axes), without
    /// any metric volume factor. Periodic axes weight every node fully.
    pub fn quad_weight(&self, flat: usize) -> f64 {
        let multi = self.multi_index(flat);
        let mut w = 1.0;
        for (axis, &i) in multi.iter().enumerate() {
            let mut wa = self.steps[axis];
            if !self.periodic[axis] && (i == 0 || i == self.shape[axis] - 1) {
                wa *= 0.5;
            }
            w *= wa;
        }
        w
    }

    /// True when the node is at least `margin` nodes away from every
    /// non-periodic edge.
    pub fn is_interior(&self, flat: usize, margin: usize) -> bool {
        let multi = self.multi_index(flat);
        multi.iter().enumerate().all(|(axis, &i)| {
            self.periodic[axis] || (i >= margin && i + margin < self.shape[axis])
        })
    }
}

/// Composite quadrature of uniformly sampled values: Simpson on even interval
/// counts, Simpson + 3/8-rule tail otherwise. `step` is the sample spacing.
pub fn integrate_uniform(values: &[Complex64], step: f64) -> Complex64 {
    let n = values.len();
    if n < 2 {
        return Complex64::new(0.0, 0.0);
    }
    if n == 2 {
        return (values[0] + values[1]) * (0.5 * step);
    }
    let intervals = n - 1;
    let mut acc = Complex64::new(0.0, 0.0);
    let simpson_end = if intervals % 2 == 0 { n - 1 } else { n - 4 };
    let mut i = 0;
    while i + 2 <= simpson_end {
        acc += (values[i] + values[i + 1] * 4.0 + values[i + 2]) * (step / 3.0);
        i += 2;
    }
    if intervals % 2 != 0 {
        if n >= 4 {
            let m = n - 4;
            acc += (values[m] + values[m + 1] * 3.0 + values[m + 2] * 3.0 + values[m + 3])
                * (3.0 * step / 8.0);
        } else {
            // n == 3 handled by Simpson above; n == 2 earlier.
            acc += (values[n - 2] + values[n - 1]) * (0.5 * step);
        }
    }
    acc
}

/// Real-valued version of [`integrate_uniform`].
pub fn integrate_uniform_real(values: &[f64], step: f64) -> f64 {
    let cvals: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    integrate_uniform(&cvals, step).re
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn node_roundtrip() {
        let g = GridSpec::new(&[-1.0, 0.0], &[1.0, 2.0], &[9, 17]);
        for flat in [0, 5, 72, g.len() - 1] {
            let m = g.multi_index(flat);
            assert_eq!(g.flat_index(&m), flat);
        }
        assert_eq!(g.node(0), vec![-1.0, 0.0]);
    }

    #[test]
    fn deriv_fourth_order() {
        let g = GridSpec::new(&[0.0], &[1.0], &[65]);
        let vals: Vec<Complex64> = (0..65)
            .map(|i| Complex64::new((g.axis_coord(0, i) * 3.0).sin(), 0.0))
            .collect();
        let d = g.deriv_axis(&vals, 0).unwrap();
        for i in 0..65 {
            let x = g.axis_coord(0, i);
            assert_relative_eq!(d[i].re, 3.0 * (3.0 * x).cos(), epsilon = 2e-5);
        }
    }

    #[test]
    fn deriv_periodic() {
        let g = GridSpec::new_periodic(&[0.0], &[std::f64::consts::TAU], &[64]);
        let vals: Vec<Complex64> = (0..64)
            .map(|i| Complex64::new(g.axis_coord(0, i).sin(), 0.0))
            .collect();
        let d = g.deriv_axis(&vals, 0).unwrap();
        for i in 0..64 {
            assert_relative_eq!(d[i].re, g.axis_coord(0, i).cos(), epsilon = 1e-5);
        }
    }

    #[test]
    fn interp_bilinear_exact_on_linear() {
        let g = GridSpec::new(&[0.0, 0.0], &[1.0, 1.0], &[11, 11]);
        let vals: Vec<Complex64> = (0..g.len())
            .map(|f| {
                let x = g.node(f);
                Complex64::new(2.0 * x[0] - 3.0 * x[1] + 0.5, 0.0)
            })
            .collect();
        let v = g.interp(&vals, &[0.371, 0.442]);
        assert_relative_eq!(v.re, 2.0 * 0.371 - 3.0 * 0.442 + 0.5, epsilon = 1e-12);
    }

    #[test]
    fn simpson_handles_odd_interval_count() {
        for n in [5usize, 6, 7, 8, 9] {
            let step = 1.0 / (n - 1) as f64;
            let vals: Vec<Complex64> = (0..n)
                .map(|i| {
                    let x = i as f64 * step;
                    Complex64::new(x * x * x, 0.0)
                })
                .collect();
            let q = integrate_uniform(&vals, step);
            assert_relative_eq!(q.re, 0.25, epsilon = 1e-12);
        }
    }
}
