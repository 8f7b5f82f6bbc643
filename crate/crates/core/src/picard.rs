//! Existence machinery: line Duhamel operators along the two
//! characteristics, the Picard sequence on the derivative field
//! `w = u_x`, and the a-priori estimate with its horizon factor `E(T)`.
//!
//! The iteration is
//!
//! ```text
//! w_1 = eps ux0,   w_{j+1} = eps ux0 + conj(L_a')(|w_j|^p),
//! ```
//!
//! where `L_a'` sums the two line integrals and its conjugate takes their
//! difference. Quadrature nodes sit on the same unit-CFL lattice the
//! evolution solver uses, so cross-solver comparisons involve no
//! interpolation.

use crate::error::{Error, Result};
use crate::model::{free_solution, weight, ProblemSpec};
use rayon::prelude::*;

use std::io::Write;

/// Which sign the second line integral enters with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineSign {
    Plus,
    Minus,
}

/// Trapezoid quadrature of
/// `(1/2) int_0^t field(x+t-s, s) <x+t-s>^(-a) ds
///  +/- (1/2) int_0^t field(x-t+s, s) <x-t+s>^(-a) ds`.
pub fn duhamel_line<F: Fn(f64, f64) -> f64>(
    field: F,
    x: f64,
    t: f64,
    a: f64,
    sign: LineSign,
    quad_n: usize,
) -> f64 {
    assert!(t >= 0.0, "duhamel_line needs t >= 0");
    assert!(quad_n >= 1);
    if t == 0.0 {
        return 0.0;
    }
    let h = t / quad_n as f64;
    let mut plus = 0.0;
    let mut minus = 0.0;
    for k in 0..=quad_n {
        let s = k as f64 * h;
        let tw = if k == 0 || k == quad_n { 0.5 } else { 1.0 };
        let yp = x + t - s;
        let ym = x - t + s;
        plus += tw * field(yp, s) * weight(yp, a);
        minus += tw * field(ym, s) * weight(ym, a);
    }
    match sign {
        LineSign::Plus => 0.5 * h * (plus + minus),
        LineSign::Minus => 0.5 * h * (plus - minus),
    }
}

/// Horizon factor of the a-priori estimate:
/// `(T+2R)^(1-a)` for `a < 1`, `log(T+2R)` at `a = 1`, `1` for `a > 1`.
pub fn apriori_factor(t: f64, a: f64, r: f64) -> f64 {
    assert!(t >= 0.0 && r >= 1.0);
    if a < 1.0 {
        (t + 2.0 * r).powf(1.0 - a)
    } else if a == 1.0 {
        (t + 2.0 * r).ln()
    } else {
        1.0
    }
}

/// A space-time field sampled on the unit-CFL lattice over `[0, T]`.
#[derive(Debug, Clone)]
pub struct LatticeField {
    pub delta: f64,
    /// Grid coordinate of column 0 in units of `delta`.
    pub i0: i64,
    pub n_x: usize,
    pub n_t: usize,
    /// Row-major `(n_t + 1) x n_x`.
    pub values: Vec<f64>,
}

impl LatticeField {
    pub fn zeros(r: f64, t_horizon: f64, delta: f64) -> Self {
        let half = ((t_horizon + r) / delta).ceil() as usize + 2;
        let n_x = 2 * half + 1;
        let n_t = (t_horizon / delta).round().max(1.0) as usize;
        LatticeField {
            delta,
            i0: -(half as i64),
            n_x,
            n_t,
            values: vec![0.0; (n_t + 1) * n_x],
        }
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        (self.i0 + i as i64) as f64 * self.delta
    }

    #[inline]
    pub fn t(&self, m: usize) -> f64 {
        m as f64 * self.delta
    }

    pub fn level(&self, m: usize) -> &[f64] {
        &self.values[m * self.n_x..(m + 1) * self.n_x]
    }

    #[inline]
    fn at(&self, m: usize, j: i64) -> f64 {
        if j < 0 || j >= self.n_x as i64 {
            // Out of allocation implies out of the support cone.
            0.0
        } else {
            self.values[m * self.n_x + j as usize]
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    /// Sup distance to another field on the same lattice.
    pub fn sup_distance(&self, other: &LatticeField) -> f64 {
        assert_eq!(self.values.len(), other.values.len());
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()))
    }

    /// Value at the lattice node closest to `(x, t)`.
    pub fn value_near(&self, x: f64, t: f64) -> f64 {
        let m = ((t / self.delta).round() as usize).min(self.n_t);
        let j = (x / self.delta).round() as i64 - self.i0;
        self.at(m, j)
    }

    fn assert_cone(&self, r: f64) {
        for m in 0..=self.n_t {
            let reach = self.t(m) + r + 0.5 * self.delta;
            for i in 0..self.n_x {
                if self.x(i).abs() > reach {
                    assert!(
                        self.values[m * self.n_x + i] == 0.0,
                        "lattice value outside cone at t = {}, x = {}",
                        self.t(m),
                        self.x(i)
                    );
                }
            }
        }
    }
}

/// Line integral of `field` (cone-supported lattice samples) along the two
/// characteristics through `(x_i, t_m)`, sharing nodes with the lattice.
/// `conjugate` subtracts the second line; `absolute` integrates `|field|`.
pub fn lattice_line_integral(
    field: &LatticeField,
    weights: &[f64],
    i: usize,
    m: usize,
    conjugate: bool,
    absolute: bool,
) -> f64 {
    if m == 0 {
        return 0.0;
    }
    let mut plus = 0.0;
    let mut minus = 0.0;
    let ii = i as i64;
    for k in 0..=m {
        let tw = if k == 0 || k == m { 0.5 } else { 1.0 };
        let off = (m - k) as i64;
        let jp = ii + off;
        let jm = ii - off;
        let mut vp = field.at(k, jp);
        let mut vm = field.at(k, jm);
        if absolute {
            vp = vp.abs();
            vm = vm.abs();
        }
        let wp = if jp >= 0 && (jp as usize) < weights.len() {
            weights[jp as usize]
        } else {
            0.0
        };
        let wm = if jm >= 0 && (jm as usize) < weights.len() {
            weights[jm as usize]
        } else {
            0.0
        };
        plus += tw * vp * wp;
        minus += tw * vm * wm;
    }
    if conjugate {
        0.5 * field.delta * (plus - minus)
    } else {
        0.5 * field.delta * (plus + minus)
    }
}

fn column_weights(field: &LatticeField, a: f64) -> Vec<f64> {
    (0..field.n_x).map(|i| weight(field.x(i), a)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PicardStatus {
    Converged,
    MaxIter,
    Diverged,
}

/// Norm history and final iterate of a Picard run.
#[derive(Debug, Clone)]
pub struct PicardReport {
    pub iterate_norms: Vec<f64>,
    pub diff_norms: Vec<f64>,
    pub contraction_ratios: Vec<f64>,
    pub converged: bool,
    pub status: PicardStatus,
    pub final_field: LatticeField,
}

impl PicardReport {
    /// CSV export with header `j,norm,diff,ratio`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "j,norm,diff,ratio")?;
        for (idx, norm) in self.iterate_norms.iter().enumerate() {
            let diff = self.diff_norms.get(idx).copied().unwrap_or(f64::NAN);
            let ratio = if idx >= 1 {
                self.contraction_ratios.get(idx - 1).copied().unwrap_or(f64::NAN)
            } else {
                f64::NAN
            };
            writeln!(out, "{},{},{},{}", idx + 1, norm, diff, ratio)?;
        }
        Ok(())
    }
}

/// Runs the Picard iteration for `w = u_x` on `[0, T]`.
///
/// Divergence (three consecutive growing difference norms) is reported via
/// `status`, signalling that `T` is too large for contraction at this
/// amplitude.
pub fn picard_run(
    spec: &ProblemSpec,
    t_horizon: f64,
    delta: f64,
    j_max: usize,
    tol: f64,
) -> Result<PicardReport> {
    spec.validate()?;
    if !(t_horizon > 0.0) || !(delta > 0.0) {
        return Err(Error::InvalidParameter(
            "picard_run needs T > 0 and delta > 0".to_string(),
        ));
    }
    if j_max < 2 {
        return Err(Error::InvalidParameter("j_max must be >= 2".to_string()));
    }
    let data = spec.data()?;
    let p = spec.p;

    let mut base = LatticeField::zeros(spec.r, t_horizon, delta);
    let (n_x, n_t) = (base.n_x, base.n_t);
    for m in 0..=n_t {
        let t = base.t(m);
        for i in 0..n_x {
            let x = base.x(i);
            base.values[m * n_x + i] = free_solution(&data, spec.eps, x, t).ux;
        }
    }
    let weights = column_weights(&base, spec.a);

    let mut w = base.clone();
    let mut iterate_norms = vec![w.sup_norm()];
    let mut diff_norms: Vec<f64> = Vec::new();
    let mut ratios: Vec<f64> = Vec::new();
    let mut status = PicardStatus::MaxIter;

    let mut nonlin = LatticeField { values: vec![0.0; w.values.len()], ..w.clone() };
    for _j in 2..=j_max {
        for (dst, src) in nonlin.values.iter_mut().zip(&w.values) {
            *dst = src.abs().powf(p);
        }
        let mut next = base.clone();
        let nonlin_ref = &nonlin;
        let weights_ref = &weights;
        next.values
            .par_chunks_mut(n_x)
            .enumerate()
            .for_each(|(m, row)| {
                if m == 0 {
                    return;
                }
                for (i, cell) in row.iter_mut().enumerate() {
                    *cell += lattice_line_integral(nonlin_ref, weights_ref, i, m, true, false);
                }
            });
        next.assert_cone(spec.r);

        let d = next.sup_distance(&w);
        diff_norms.push(d);
        if diff_norms.len() >= 2 {
            let prev = diff_norms[diff_norms.len() - 2];
            ratios.push(if prev > 0.0 {
                d / prev
            } else if d == 0.0 {
                0.0
            } else {
                f64::INFINITY
            });
        }
        iterate_norms.push(next.sup_norm());
        w = next;

        if d <= tol {
            status = PicardStatus::Converged;
            break;
        }
        if diff_norms.len() >= 3 {
            let n = diff_norms.len();
            if diff_norms[n - 1] > diff_norms[n - 2] && diff_norms[n - 2] > diff_norms[n - 3] {
                status = PicardStatus::Diverged;
                break;
            }
        }
    }

    let converged = status == PicardStatus::Converged
        && ratios.last().map_or(true, |&r| r < 1.0);
    Ok(PicardReport {
        iterate_norms,
        diff_norms,
        contraction_ratios: ratios,
        converged,
        status,
        final_field: w,
    })
}

/// Measured a-priori estimate for one cone-supported field.
#[derive(Debug, Clone)]
pub struct AprioriReport {
    pub t_horizon: f64,
    pub a: f64,
    /// `sup |conj(L_a')(|w|^p)|` over the lattice.
    pub measured_lhs: f64,
    /// `||w||^p * E(T)`.
    pub rhs_factor: f64,
    pub implied_c: f64,
}

/// Evaluates both sides of the a-priori estimate on the lattice and
/// asserts the pointwise domination of the conjugate operator by the
/// absolute one at every node.
pub fn apriori_check(w: &LatticeField, t_horizon: f64, a: f64, r: f64, p: f64) -> AprioriReport {
    let weights = column_weights(w, a);
    let mut nonlin = w.clone();
    for v in nonlin.values.iter_mut() {
        *v = v.abs().powf(p);
    }
    let n_x = w.n_x;
    let measured_lhs = (0..=w.n_t)
        .into_par_iter()
        .map(|m| {
            let mut worst: f64 = 0.0;
            for i in 0..n_x {
                let conj = lattice_line_integral(&nonlin, &weights, i, m, true, false);
                let dom = lattice_line_integral(&nonlin, &weights, i, m, false, true);
                assert!(
                    conj.abs() <= dom + 1e-12 * dom.abs().max(1.0),
                    "pointwise domination fails at m = {m}, i = {i}"
                );
                worst = worst.max(conj.abs());
            }
            worst
        })
        .reduce(|| 0.0f64, f64::max);
    let norm = w.sup_norm();
    let rhs_factor = norm.powf(p) * apriori_factor(t_horizon, a, r);
    AprioriReport {
        t_horizon,
        a,
        measured_lhs,
        rhs_factor,
        implied_c: if rhs_factor > 0.0 {
            measured_lhs / rhs_factor
        } else {
            0.0
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Preset;
    use crate::quad::SplitMix64;
    use crate::solver::{evolve_with, EvolveOptions};

    fn spec(p: f64, a: f64, eps: f64) -> ProblemSpec {
        ProblemSpec::new(p, a, eps, 1.0, Preset::BumpBoth).unwrap()
    }

    #[test]
    fn duhamel_line_closed_forms() {
        assert_eq!(duhamel_line(|_, _| 0.0, 0.4, 2.0, 1.0, LineSign::Plus, 50), 0.0);
        // Constant field, no weight, plus sign: t/2 + t/2 = t.
        let v = duhamel_line(|_, _| 1.0, -3.0, 1.7, 0.0, LineSign::Plus, 2000);
        assert!((v - 1.7).abs() < 1e-12, "got {v}");
        // Even field, x = 0, minus sign: exact cancellation.
        let v = duhamel_line(|y, _| y * y + 1.0, 0.0, 2.0, 0.7, LineSign::Minus, 500);
        assert!(v.abs() < 1e-13, "got {v}");
    }

    #[test]
    fn apriori_factor_branches() {
        assert_eq!(apriori_factor(5.0, 2.0, 1.0), 1.0);
        // a = 1 with T + 2R = e gives log e = 1.
        let t = std::f64::consts::E - 2.0;
        assert!((apriori_factor(t, 1.0, 1.0) - 1.0).abs() < 1e-14);
        assert_eq!(apriori_factor(1.0, 0.0, 1.0), 3.0);
    }

    #[test]
    fn zero_data_converges_immediately() {
        let spec = ProblemSpec::new(2.0, 0.0, 1.0, 1.0, Preset::Zero).unwrap();
        let report = picard_run(&spec, 0.5, 1.0 / 50.0, 6, 1e-12).unwrap();
        assert!(report.converged);
        assert_eq!(report.status, PicardStatus::Converged);
        assert_eq!(report.iterate_norms.len(), 2);
        assert_eq!(report.diff_norms[0], 0.0);
        assert_eq!(report.final_field.sup_norm(), 0.0);
    }

    #[test]
    fn contraction_and_cross_solver_agreement() {
        let spec = spec(2.0, 0.0, 0.1);
        let delta = 1.0 / 100.0;
        let t = 0.25;
        let report = picard_run(&spec, t, delta, 12, 1e-13).unwrap();
        assert!(report.converged, "status {:?}", report.status);
        for &r in &report.contraction_ratios {
            assert!(r < 1.0, "ratio {r}");
        }

        let opts = EvolveOptions::new(t, 1e6).with_frames(1);
        let run = evolve_with(&spec, delta, &opts).unwrap();
        let frame = run.frame_near(t).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..frame.len() {
            let x = frame.x(i);
            let wp = report.final_field.value_near(x, t);
            worst = worst.max((wp - frame.w[i]).abs());
        }
        assert!(worst <= 10.0 * delta * delta, "disagreement {worst}");
    }

    #[test]
    fn divergence_is_flagged_for_large_amplitude_and_horizon() {
        let spec = spec(2.0, 0.0, 5.0);
        let report = picard_run(&spec, 5.0, 1.0 / 40.0, 12, 1e-10).unwrap();
        assert_eq!(report.status, PicardStatus::Diverged);
        assert!(!report.converged);
    }

    #[test]
    fn monotone_horizon_property() {
        let spec = spec(2.0, 0.0, 0.1);
        let long = picard_run(&spec, 0.5, 1.0 / 80.0, 10, 1e-12).unwrap();
        let short = picard_run(&spec, 0.25, 1.0 / 80.0, 10, 1e-12).unwrap();
        assert!(long.converged && short.converged);
        assert!(
            short.diff_norms.last().unwrap() <= long.diff_norms.last().unwrap()
                || short.diff_norms.len() < long.diff_norms.len()
        );
    }

    #[test]
    fn pointwise_domination_for_random_fields() {
        let mut rng = SplitMix64::new(99);
        for trial in 0..5 {
            let mut field = LatticeField::zeros(1.0, 0.5, 1.0 / 20.0);
            let n_x = field.n_x;
            for m in 0..=field.n_t {
                let reach = field.t(m) + 1.0;
                for i in 0..n_x {
                    if field.x(i).abs() <= reach {
                        field.values[m * n_x + i] = rng.range(-2.0, 2.0);
                    }
                }
            }
            let weights = column_weights(&field, 0.7);
            for m in [1usize, field.n_t / 2, field.n_t] {
                for i in (0..n_x).step_by(3) {
                    let conj = lattice_line_integral(&field, &weights, i, m, true, false);
                    let dom = lattice_line_integral(&field, &weights, i, m, false, true);
                    assert!(
                        conj.abs() <= dom + 1e-12,
                        "trial {trial}: |conj| = {} > {}",
                        conj.abs(),
                        dom
                    );
                }
            }
        }
    }

    #[test]
    fn apriori_constant_field_implies_c_at_most_one() {
        let mut field = LatticeField::zeros(1.0, 1.0, 1.0 / 40.0);
        let n_x = field.n_x;
        for m in 0..=field.n_t {
            let reach = field.t(m) + 1.0;
            for i in 0..n_x {
                if field.x(i).abs() <= reach {
                    field.values[m * n_x + i] = 1.0;
                }
            }
        }
        let report = apriori_check(&field, 1.0, 0.0, 1.0, 2.0);
        assert!(report.implied_c <= 1.0, "implied C = {}", report.implied_c);
        assert!(report.measured_lhs > 0.0);
    }

    #[test]
    fn apriori_zero_field() {
        let field = LatticeField::zeros(1.0, 0.5, 1.0 / 20.0);
        let report = apriori_check(&field, 0.5, 0.5, 1.0, 2.0);
        assert_eq!(report.measured_lhs, 0.0);
    }

    #[test]
    fn implied_c_stable_under_refinement() {
        // Smooth cone-supported field; implied C should move < 5% from
        // delta to delta/2.
        let build = |delta: f64| {
            let mut field = LatticeField::zeros(1.0, 1.0, delta);
            let n_x = field.n_x;
            for m in 0..=field.n_t {
                let t = field.t(m);
                let reach = t + 1.0;
                for i in 0..n_x {
                    let x = field.x(i);
                    if x.abs() < reach {
                        let s = x / reach;
                        field.values[m * n_x + i] = (1.0 - s * s).powi(2) * (1.0 + t);
                    }
                }
            }
            field
        };
        let c1 = apriori_check(&build(1.0 / 50.0), 1.0, 0.5, 1.0, 2.0).implied_c;
        let c2 = apriori_check(&build(1.0 / 100.0), 1.0, 0.5, 1.0, 2.0).implied_c;
        assert!((c1 - c2).abs() <= 0.05 * c2.abs(), "c1 = {c1}, c2 = {c2}");
    }

    #[test]
    fn picard_rejects_bad_arguments() {
        let spec = spec(2.0, 0.0, 0.1);
        assert!(picard_run(&spec, 0.0, 0.01, 5, 1e-8).is_err());
        assert!(picard_run(&spec, 1.0, 0.01, 1, 1e-8).is_err());
    }
}
