//! Numerical verification of the convexified-weight Carleman inequalities as
//! falsifiable inequalities over test-function families: per-u ratios of the
//! conjugated-operator norm against the semiclassically weighted left side.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{CoreError, Result};
use crate::fields::{
    conjugated_apply, conjugated_real_parts, exterior_d, h1_scl_norm, h2_scl_norm, l2_norm,
    ConjugationWeight, ResidualDecomposition, SampledField, SampledOneForm, Scaling,
    SemiclassicalParams,
};
use crate::geometry::{pt, MetricChart};
use crate::grid::GridSpec;
use crate::par::{map_indexed, ExecMode};

/// Convexified Carleman weight phi~ = phi + (h / 2 eps) phi^2 with phi = x1.
#[derive(Debug, Clone, Copy)]
pub struct CarlemanWeight {
    pub epsilon: Option<f64>,
    pub h: f64,
}

impl CarlemanWeight {
    pub fn convexified(h: f64, epsilon: f64, phi_max: f64) -> Result<Self> {
        // h/eps <= eps0 < 1 with 1 + (h/eps) phi >= 1/2 on the chart.
        if h / epsilon * phi_max > 0.5 {
            return Err(CoreError::Parameter(format!(
                "h/eps * max|phi| = {:.3} violates the convexification margin",
                h / epsilon * phi_max
            )));
        }
        Ok(Self {
            epsilon: Some(epsilon),
            h,
        })
    }

    pub fn linear(h: f64) -> Self {
        Self { epsilon: None, h }
    }

    fn conjugation(&self) -> ConjugationWeight {
        match self.epsilon {
            Some(e) => ConjugationWeight::RealConvexified { epsilon: e },
            None => ConjugationWeight::RealLinear,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CarlemanKind {
    /// (h/sqrt(eps)) ||u||_{H2_scl} <= C || P~ u ||_{L2}, s = 0 case.
    LaplaceS0,
    /// h ||u||_{H1_scl} <= C || e^{phi~/h} h^2 L_{A,q} e^{-phi~/h} u ||_{H-1}.
    Magnetic,
}

#[derive(Debug, Clone, Serialize)]
pub struct CarlemanReport {
    pub h: f64,
    pub epsilon: Option<f64>,
    pub family: String,
    pub ratios: Vec<f64>,
    pub min_ratio: f64,
}

/// Test-function families on a flat slab chart. Members are coherent states
/// e^{i xi . x / h} g(x) whose phase-space centers sample both the elliptic
/// region and the characteristic variety |xi| = 1, xi_1 = 0 of the weight.
pub fn bump_family(
    chart: &MetricChart,
    grid: &GridSpec,
    h: f64,
    count: usize,
    seed: u64,
) -> Vec<SampledField> {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let cx = rng.gen_range(-0.35..0.35);
        let cy = rng.gen_range(-0.35..0.35);
        let w = rng.gen_range(0.10..0.22);
        // A third of the family is plain bumps, a third oscillates on the
        // characteristic set, the rest at generic frequencies.
        let (xi1, xi2): (f64, f64) = match k % 3 {
            0 => (0.0, 0.0),
            1 => (0.0, if k % 2 == 0 { 1.0 } else { -1.0 }),
            _ => {
                let a = rng.gen_range(0.0..std::f64::consts::TAU);
                let r = rng.gen_range(0.4..1.8);
                (r * a.cos(), r * a.sin())
            }
        };
        out.push(SampledField::from_fn(chart, grid, |x| {
            let g = (-((x[0] - cx).powi(2) + (x[1] - cy).powi(2)) / (2.0 * w * w)).exp();
            let cut = interior_cutoff(x, grid);
            (Complex64::i() * ((xi1 * x[0] + xi2 * x[1]) / h)).exp() * (g * cut)
        }));
    }
    out
}

/// Smooth cutoff that vanishes identically on the outer 15% of the grid box.
fn interior_cutoff(x: &crate::geometry::Pt, grid: &GridSpec) -> f64 {
    let mut cut = 1.0;
    for k in 0..2 {
        let lo = grid.mins[k];
        let hi = grid.axis_coord(k, grid.shape[k] - 1);
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        let s = ((x[k] - mid) / half).abs();
        cut *= crate::beam::smooth_step((0.85 - s) / 0.12);
    }
    cut
}

/// Adversarial family: oscillations exactly on the characteristic variety
/// with envelopes close to the kernel of the subprincipal transport operator
/// (functions of x1 - i x2 times wide bumps).
pub fn adversarial_family(
    chart: &MetricChart,
    grid: &GridSpec,
    h: f64,
    count: usize,
    seed: u64,
) -> Vec<SampledField> {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let lo = grid.mins.clone();
    let hi: Vec<f64> = (0..2).map(|k| grid.axis_coord(k, grid.shape[k] - 1)).collect();
    let half = [(hi[0] - lo[0]) / 2.0, (hi[1] - lo[1]) / 2.0];
    let mid = [(hi[0] + lo[0]) / 2.0, (hi[1] + lo[1]) / 2.0];
    for k in 0..count {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let kk = (k / 2) as f64;
        // The first pair are pure characteristic windows (the transport
        // envelope term is smallest for the widest unmodulated profile).
        let freq = if k < 2 {
            0.0
        } else {
            rng.gen_range(0.0..1.5) + kk * 0.5
        };
        out.push(SampledField::from_fn(chart, grid, |x| {
            // Wide separable envelope vanishing at the boundary.
            let u = (x[0] - mid[0]) / half[0];
            let v = (x[1] - mid[1]) / half[1];
            let env = (std::f64::consts::FRAC_PI_2 * u).cos().max(0.0).powi(2)
                * (std::f64::consts::FRAC_PI_2 * v).cos().max(0.0).powi(2)
                * interior_cutoff(x, grid);
            // Oscillation on the characteristic set, modulated by an
            // annihilator-direction factor e^{i freq (x1 - i x2)}.
            let osc = (Complex64::i() * (sign * x[1] / h)).exp();
            let hol = (Complex64::i() * freq * Complex64::new(x[0], -sign * x[1])).exp();
            osc * hol * env
        }));
    }
    out
}

/// Check compact support (trace below 1e-12 on the boundary ring) and
/// evaluate the per-u ratios; the inequality predicts min_ratio >= 1/C.
pub fn verify_carleman(
    chart: &MetricChart,
    family: &[SampledField],
    params: &SemiclassicalParams,
    weight: CarlemanWeight,
    kind: CarlemanKind,
    a: Option<&SampledOneForm>,
    q: Option<&SampledField>,
    mode: ExecMode,
    family_name: &str,
) -> Result<CarlemanReport> {
    if family.is_empty() {
        return Err(CoreError::Contract("empty test family".into()));
    }
    let h = params.h();
    for u in family {
        let grid = &u.grid;
        let mut trace: f64 = 0.0;
        for i in 0..grid.len() {
            if !grid.is_interior(i, 1) {
                trace = trace.max(u.values[i].norm());
            }
        }
        if trace > 1e-12 {
            return Err(CoreError::Contract(format!(
                "test function trace {trace:.2e} at the boundary ring"
            )));
        }
    }
    let sqrt_eps = weight.epsilon.map(|e| e.sqrt()).unwrap_or(1.0);
    let ratios: Vec<f64> = {
        let results = map_indexed(mode, family.len(), |k| -> Result<f64> {
            let u = &family[k];
            match kind {
                CarlemanKind::LaplaceS0 => {
                    let zero_a = SampledOneForm::zeros(chart, &u.grid);
                    let zero_q = SampledField::zeros(chart, &u.grid);
                    let pu = conjugated_apply(
                        u,
                        &zero_a,
                        &zero_q,
                        params,
                        weight.conjugation(),
                        Scaling::H2,
                    )?;
                    let rhs = l2_norm(&pu);
                    let lhs = h / sqrt_eps * h2_scl_norm(u, params)?;
                    Ok(rhs / lhs)
                }
                CarlemanKind::Magnetic => {
                    let a = a.ok_or_else(|| {
                        CoreError::Contract("magnetic check needs a potential".into())
                    })?;
                    let q = q.ok_or_else(|| {
                        CoreError::Contract("magnetic check needs q".into())
                    })?;
                    // Smooth part: conjugated Laplacian plus the first-order
                    // magnetic terms that carry no derivative of A; the
                    // rough divergence i h^2 d*(A u) is declared as w1.
                    let zero_a = SampledOneForm::zeros(chart, &u.grid);
                    let zero_q = SampledField::zeros(chart, &u.grid);
                    let base = conjugated_apply(
                        u,
                        &zero_a,
                        &zero_q,
                        params,
                        weight.conjugation(),
                        Scaling::H2,
                    )?;
                    let du = exterior_d(u)?;
                    let eps = weight.epsilon.unwrap_or(f64::INFINITY);
                    let mut smooth = base.values.clone();
                    let grid = &u.grid;
                    let mut w1 = SampledOneForm::zeros(chart, grid);
                    for i in 0..grid.len() {
                        let x = pt(&grid.node(i));
                        let gi = chart.metric_full(&x).try_inverse().unwrap();
                        let mut a_du = Complex64::new(0.0, 0.0);
                        let mut a_dphi = Complex64::new(0.0, 0.0);
                        let mut a_a = Complex64::new(0.0, 0.0);
                        let fp = match weight.epsilon {
                            Some(_) => 1.0 + (h / eps) * x[0],
                            None => 1.0,
                        };
                        for j in 0..chart.dim {
                            for kk in 0..chart.dim {
                                a_du += a.components[j][i] * du.components[kk][i] * gi[(j, kk)];
                                a_a += a.components[j][i] * a.components[kk][i] * gi[(j, kk)];
                            }
                            a_dphi += a.components[j][i] * gi[(j, 0)] * fp;
                        }
                        smooth[i] += -Complex64::i() * (h * h) * a_du
                            + Complex64::i() * 2.0 * h * a_dphi * u.values[i]
                            + (h * h) * (a_a + q.values[i]) * u.values[i];
                        for j in 0..chart.dim {
                            w1.components[j][i] =
                                Complex64::i() * (h * h) * a.components[j][i] * u.values[i];
                        }
                    }
                    let dec = ResidualDecomposition {
                        smooth: SampledField {
                            chart: chart.clone(),
                            grid: grid.clone(),
                            values: smooth,
                        },
                        divergence: Some(w1),
                    };
                    let rhs = dec.h_minus1_scl_bound(params);
                    let lhs = h * h1_scl_norm(u, params)?;
                    Ok(rhs / lhs)
                }
            }
        });
        let mut v = Vec::with_capacity(results.len());
        for r in results {
            v.push(r?);
        }
        v
    };
    let min_ratio = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(CarlemanReport {
        h,
        epsilon: weight.epsilon,
        family: family_name.to_string(),
        ratios,
        min_ratio,
    })
}

/// Self-adjoint decomposition identity: || P~ u ||^2 equals
/// ||A u||^2 + ||B u||^2 + i([A, B] u, u) for compactly supported u; the
/// returned value is the relative defect.
pub fn decomposition_identity_defect(
    chart: &MetricChart,
    u: &SampledField,
    params: &SemiclassicalParams,
    weight: CarlemanWeight,
) -> Result<f64> {
    let zero_a = SampledOneForm::zeros(chart, &u.grid);
    let zero_q = SampledField::zeros(chart, &u.grid);
    let pu = conjugated_apply(u, &zero_a, &zero_q, params, weight.conjugation(), Scaling::H2)?;
    let (au, bu) = conjugated_real_parts(u, params, weight.conjugation())?;
    let (abu, _) = {
        let (a_of_bu, _) = conjugated_real_parts(&bu, params, weight.conjugation())?;
        (a_of_bu, ())
    };
    let (b_of_au_pair, _) = {
        let (_, b_of_au) = conjugated_real_parts(&au, params, weight.conjugation())?;
        (b_of_au, ())
    };
    // i([A,B]u, u) = i ( (AB - BA) u, u ).
    let grid = &u.grid;
    let mut comm = Complex64::new(0.0, 0.0);
    let mut pn = 0.0;
    let mut an = 0.0;
    let mut bn = 0.0;
    for i in 0..grid.len() {
        let w = grid.quad_weight(i);
        let c = (abu.values[i] - b_of_au_pair.values[i]) * u.values[i].conj();
        comm += c * w;
        pn += pu.values[i].norm_sqr() * w;
        an += au.values[i].norm_sqr() * w;
        bn += bu.values[i].norm_sqr() * w;
    }
    let lhs = pn;
    let rhs = an + bn + (Complex64::i() * comm).re;
    Ok((lhs - rhs).abs() / lhs.max(1e-300))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn slab() -> (MetricChart, GridSpec) {
        let chart = MetricChart::flat_slab(&[-1.0, -1.0], &[1.0, 1.0]);
        let grid = GridSpec::new(&[-1.0, -1.0], &[1.0, 1.0], &[160, 160]);
        (chart, grid)
    }

    #[test]
    fn homogeneity_of_ratios() {
        let (chart, grid) = slab();
        let params = SemiclassicalParams::new(0.1, 0.0).unwrap();
        let weight = CarlemanWeight::convexified(0.1, 0.3, 1.0).unwrap();
        let fam = bump_family(&chart, &grid, 0.1, 2, 11);
        let doubled: Vec<SampledField> =
            fam.iter().map(|u| u.map(|v| v * 2.0)).collect();
        let r1 = verify_carleman(
            &chart,
            &fam,
            &params,
            weight,
            CarlemanKind::LaplaceS0,
            None,
            None,
            ExecMode::Sequential,
            "fam",
        )
        .unwrap();
        let r2 = verify_carleman(
            &chart,
            &doubled,
            &params,
            weight,
            CarlemanKind::LaplaceS0,
            None,
            None,
            ExecMode::Sequential,
            "fam2",
        )
        .unwrap();
        for (a, b) in r1.ratios.iter().zip(&r2.ratios) {
            assert!((a - b).abs() < 1e-10 * a.max(1.0));
        }
    }

    #[test]
    fn convexified_min_ratio_stable_in_h() {
        let (chart, grid) = slab();
        let mut mins = Vec::new();
        for &h in &[0.1, 0.05, 0.025] {
            let params = SemiclassicalParams::new(h, 0.0).unwrap();
            let weight = CarlemanWeight::convexified(h, 0.3, 1.0).unwrap();
            let fam = bump_family(&chart, &grid, h, 20, 42);
            let rep = verify_carleman(
                &chart,
                &fam,
                &params,
                weight,
                CarlemanKind::LaplaceS0,
                None,
                None,
                ExecMode::Parallel,
                "bump",
            )
            .unwrap();
            mins.push(rep.min_ratio);
        }
        let cmax = mins.iter().cloned().fold(0.0f64, f64::max);
        let cmin = mins.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(cmin > 0.0);
        assert!(cmax / cmin < 2.0, "fitted C varies too much: {mins:?}");
    }

    #[test]
    fn decomposition_identity() {
        let (chart, grid) = slab();
        let params = SemiclassicalParams::new(0.05, 0.0).unwrap();
        let weight = CarlemanWeight::convexified(0.05, 0.3, 1.0).unwrap();
        let u = SampledField::from_fn(&chart, &grid, |x| {
            let g = (-(x[0] * x[0] + x[1] * x[1]) / 0.05).exp();
            (Complex64::i() * (x[1] / 0.05)).exp() * (g * interior_cutoff(x, &grid))
        });
        let defect = decomposition_identity_defect(&chart, &u, &params, weight).unwrap();
        assert!(defect < 5e-3, "decomposition defect {defect}");
    }

    #[test]
    fn support_contract_enforced() {
        let (chart, grid) = slab();
        let params = SemiclassicalParams::new(0.1, 0.0).unwrap();
        let weight = CarlemanWeight::convexified(0.1, 0.3, 1.0).unwrap();
        let bad = vec![SampledField::from_fn(&chart, &grid, |_| {
            Complex64::new(1.0, 0.0)
        })];
        assert!(verify_carleman(
            &chart,
            &bad,
            &params,
            weight,
            CarlemanKind::LaplaceS0,
            None,
            None,
            ExecMode::Sequential,
            "bad",
        )
        .is_err());
    }
}
