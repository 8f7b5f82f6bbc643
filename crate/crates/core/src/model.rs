//! Problem description: exponents, initial-data presets, the spatial weight
//! and the exact d'Alembert solution of the free equation.
//!
//! The equation under study is
//!
//! ```text
//! u_tt - u_xx = |u_x|^p / <x>^a,   u(x,0) = eps f(x),  u_t(x,0) = eps g(x),
//! ```
//!
//! with `<x> = (1+x^2)^(1/2)`, data supported in `|x| <= R`, `R >= 1`.
//! All presets are built from the polynomial bump `(1 - (x/R)^2)^3` on
//! `|x| <= R`, which is C^2 with compact support and has closed-form
//! integrals for test oracles.

use crate::error::{Error, Result};
use crate::quad::trapezoid;

/// Japanese bracket `<x> = (1 + x^2)^(1/2)`.
pub fn bracket(x: f64) -> f64 {
    (1.0 + x * x).sqrt()
}

/// The spatial weight `<x>^(-a)` used by every Duhamel operator. All of
/// them must call this, so grid code and quadrature code cannot drift.
pub fn weight(x: f64, a: f64) -> f64 {
    if a == 0.0 {
        1.0
    } else if a == 2.0 {
        1.0 / (1.0 + x * x)
    } else {
        bracket(x).powf(-a)
    }
}

/// `phi(x) = e^x + e^-x` and `psi(x) = -e^x + e^-x`, the multiplier pair
/// with `phi' = -psi` and `psi' = -phi`.
pub fn hyperbolic_pair(x: f64) -> Result<(f64, f64)> {
    let (phi, psi) = hyperbolic_pair_raw(x);
    if !phi.is_finite() {
        return Err(Error::OutOfDomain(format!(
            "hyperbolic pair overflows at x = {x}"
        )));
    }
    Ok((phi, psi))
}

pub(crate) fn hyperbolic_pair_raw(x: f64) -> (f64, f64) {
    let ep = x.exp();
    let em = (-x).exp();
    (ep + em, -ep + em)
}

/// Initial-data preset names accepted on the CLI and in configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Zero,
    BumpF,
    BumpG,
    BumpBoth,
    Thm2,
}

impl Preset {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "zero" => Ok(Preset::Zero),
            "bump_f" => Ok(Preset::BumpF),
            "bump_g" => Ok(Preset::BumpG),
            "bump_both" => Ok(Preset::BumpBoth),
            "thm2" => Ok(Preset::Thm2),
            other => Err(Error::UnknownPreset(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Zero => "zero",
            Preset::BumpF => "bump_f",
            Preset::BumpG => "bump_g",
            Preset::BumpBoth => "bump_both",
            Preset::Thm2 => "thm2",
        }
    }
}

impl std::fmt::Display for Preset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A full problem instance.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    /// Nonlinearity exponent, `p > 1`.
    pub p: f64,
    /// Weight exponent in `<x>^(-a)`.
    pub a: f64,
    /// Data amplitude, `eps > 0`.
    pub eps: f64,
    /// Support radius of the data, `R >= 1`.
    pub r: f64,
    pub preset: Preset,
    /// Bump amplitudes `(A_f, A_g)` for presets that use them.
    pub preset_params: (f64, f64),
}

impl ProblemSpec {
    pub fn new(p: f64, a: f64, eps: f64, r: f64, preset: Preset) -> Result<Self> {
        let spec = ProblemSpec {
            p,
            a,
            eps,
            r,
            preset,
            preset_params: (1.0, 1.0),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 1.0) {
            return Err(Error::InvalidParameter(format!("p must be > 1, got {}", self.p)));
        }
        if !(self.eps > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "eps must be > 0, got {}",
                self.eps
            )));
        }
        if !(self.r >= 1.0) {
            return Err(Error::InvalidParameter(format!("R must be >= 1, got {}", self.r)));
        }
        Ok(())
    }

    /// Constructs (and for `thm2` verifies) the preset initial data.
    pub fn data(&self) -> Result<InitialData> {
        preset_data(self.preset, self.r, self.preset_params)
    }

    pub fn with_eps(&self, eps: f64) -> Self {
        let mut s = self.clone();
        s.eps = eps;
        s
    }

    /// Canonical text form, used for scan fingerprints.
    pub fn canonical_string(&self) -> String {
        format!(
            "p={:?};a={:?};eps={:?};r={:?};preset={};amp_f={:?};amp_g={:?}",
            self.p, self.a, self.eps, self.r, self.preset, self.preset_params.0, self.preset_params.1
        )
    }
}

/// The support cone `|x| <= t + R` of a solution with data in `|x| <= R`.
#[derive(Debug, Clone, Copy)]
pub struct LightCone {
    pub r: f64,
}

impl LightCone {
    pub fn new(r: f64) -> Self {
        Self { r }
    }

    pub fn contains(&self, x: f64, t: f64) -> bool {
        x.abs() <= t + self.r
    }
}

/// Compactly supported C^2/C^1 initial data `(f, g)` plus derivative and
/// antiderivative accessors. Grid code samples these at nodes; quadrature
/// code calls them directly, so no interpolation error enters test oracles.
#[derive(Debug, Clone, Copy)]
pub struct InitialData {
    pub r: f64,
    pub amp_f: f64,
    pub amp_g: f64,
    pub preset: Preset,
}

impl InitialData {
    fn bump(&self, x: f64) -> f64 {
        let s = x / self.r;
        if s.abs() >= 1.0 {
            0.0
        } else {
            let q = 1.0 - s * s;
            q * q * q
        }
    }

    fn bump_d1(&self, x: f64) -> f64 {
        let s = x / self.r;
        if s.abs() >= 1.0 {
            0.0
        } else {
            let q = 1.0 - s * s;
            -6.0 * s * q * q / self.r
        }
    }

    fn bump_d2(&self, x: f64) -> f64 {
        let s = x / self.r;
        if s.abs() >= 1.0 {
            0.0
        } else {
            let q = 1.0 - s * s;
            (-6.0 * q * q + 24.0 * s * s * q) / (self.r * self.r)
        }
    }

    /// Antiderivative of the unit bump from the left support edge.
    fn bump_int(&self, x: f64) -> f64 {
        let s = (x / self.r).clamp(-1.0, 1.0);
        // int (1-s^2)^3 ds = s - s^3 + (3/5) s^5 - s^7/7, odd.
        let prim = |s: f64| s - s.powi(3) + 0.6 * s.powi(5) - s.powi(7) / 7.0;
        self.r * (prim(s) - prim(-1.0))
    }

    pub fn f(&self, x: f64) -> f64 {
        self.amp_f * self.bump(x)
    }

    pub fn f_prime(&self, x: f64) -> f64 {
        self.amp_f * self.bump_d1(x)
    }

    pub fn f_second(&self, x: f64) -> f64 {
        self.amp_f * self.bump_d2(x)
    }

    pub fn g(&self, x: f64) -> f64 {
        self.amp_g * self.bump(x)
    }

    pub fn g_prime(&self, x: f64) -> f64 {
        self.amp_g * self.bump_d1(x)
    }

    /// `G(x) = int_{-inf}^{x} g(y) dy`.
    pub fn g_antiderivative(&self, x: f64) -> f64 {
        self.amp_g * self.bump_int(x)
    }

    /// Total mass of `g`; for the bump this is `32 A_g R / 35`.
    pub fn g_total(&self) -> f64 {
        self.amp_g * self.r * 32.0 / 35.0
    }

    pub fn sample<F: Fn(&Self, f64) -> f64>(&self, xs: &[f64], which: F) -> Vec<f64> {
        xs.iter().map(|&x| which(self, x)).collect()
    }
}

/// Builds the named preset on `|x| <= R`.
///
/// `bump_f` / `bump_g` / `bump_both` switch the bump on for `f`, `g` or
/// both; `thm2` uses `f = 0`, `g = bump`, for which the sign conditions on
/// the hyperbolic moments hold — the construction verifies both integrals
/// by quadrature rather than trusting the algebra.
pub fn preset_data(preset: Preset, r: f64, amp: (f64, f64)) -> Result<InitialData> {
    if !(r >= 1.0) {
        return Err(Error::InvalidParameter(format!("R must be >= 1, got {r}")));
    }
    let data = match preset {
        Preset::Zero => InitialData {
            r,
            amp_f: 0.0,
            amp_g: 0.0,
            preset,
        },
        Preset::BumpF => InitialData {
            r,
            amp_f: amp.0,
            amp_g: 0.0,
            preset,
        },
        Preset::BumpG => InitialData {
            r,
            amp_f: 0.0,
            amp_g: amp.1,
            preset,
        },
        Preset::BumpBoth => InitialData {
            r,
            amp_f: amp.0,
            amp_g: amp.1,
            preset,
        },
        Preset::Thm2 => InitialData {
            r,
            amp_f: 0.0,
            amp_g: amp.1,
            preset,
        },
    };
    if preset == Preset::Thm2 {
        let (first, second) = thm2_moments(&data, 10_000);
        if first < -1e-12 {
            return Err(Error::PresetRejected(format!(
                "thm2 moment of f' is negative: {first}"
            )));
        }
        if second <= 0.0 {
            return Err(Error::PresetRejected(format!(
                "thm2 moment of g' - f' is not positive: {second}"
            )));
        }
    }
    Ok(data)
}

/// The two hyperbolic moments `int psi f' dx` and `int psi (g' - f') dx`
/// by trapezoid quadrature over the support.
pub fn thm2_moments(data: &InitialData, n: usize) -> (f64, f64) {
    let psi = |x: f64| hyperbolic_pair_raw(x).1;
    let first = trapezoid(|x| psi(x) * data.f_prime(x), -data.r, data.r, n);
    let second = trapezoid(
        |x| psi(x) * (data.g_prime(x) - data.f_prime(x)),
        -data.r,
        data.r,
        n,
    );
    (first, second)
}

/// The free d'Alembert solution and its derivatives, already scaled by `eps`.
#[derive(Debug, Clone, Copy)]
pub struct FreeSolution {
    pub u: f64,
    pub ux: f64,
    pub ut: f64,
    pub uxx: f64,
}

/// Exact solution of the free wave equation with data `(eps f, eps g)`:
///
/// ```text
/// u0  = (f(x+t) + f(x-t))/2 + (G(x+t) - G(x-t))/2
/// ux0 = (f'(x+t) + f'(x-t) + g(x+t) - g(x-t))/2
/// ut0 = (f'(x+t) - f'(x-t) + g(x+t) + g(x-t))/2
/// uxx0 = (f''(x+t) + f''(x-t) + g'(x+t) - g'(x-t))/2
/// ```
pub fn free_solution(data: &InitialData, eps: f64, x: f64, t: f64) -> FreeSolution {
    debug_assert!(t >= 0.0);
    let xp = x + t;
    let xm = x - t;
    let u = 0.5 * (data.f(xp) + data.f(xm)) + 0.5 * (data.g_antiderivative(xp) - data.g_antiderivative(xm));
    let ux = 0.5 * (data.f_prime(xp) + data.f_prime(xm) + data.g(xp) - data.g(xm));
    let ut = 0.5 * (data.f_prime(xp) - data.f_prime(xm) + data.g(xp) + data.g(xm));
    let uxx = 0.5 * (data.f_second(xp) + data.f_second(xm) + data.g_prime(xp) - data.g_prime(xm));
    FreeSolution {
        u: eps * u,
        ux: eps * ux,
        ut: eps * ut,
        uxx: eps * uxx,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::SplitMix64;

    #[test]
    fn bracket_values() {
        assert_eq!(bracket(0.0), 1.0);
        assert!((bracket(1.0) - std::f64::consts::SQRT_2).abs() < 1e-15);
        assert_eq!(bracket(-3.0), bracket(3.0));
        assert!(bracket(0.5) >= 1.0);
    }

    #[test]
    fn weight_matches_bracket_power_at_random_points() {
        let mut rng = SplitMix64::new(7);
        for _ in 0..100 {
            let x = rng.range(-30.0, 30.0);
            for a in [-1.0, -0.5, 0.0, 0.5, 1.0, 2.0, 2.5] {
                let direct = bracket(x).powf(-a);
                assert!(
                    (weight(x, a) - direct).abs() <= 1e-15 * direct.abs().max(1.0),
                    "weight mismatch at x={x}, a={a}"
                );
            }
        }
    }

    #[test]
    fn hyperbolic_pair_values_and_parity() {
        let (phi0, psi0) = hyperbolic_pair(0.0).unwrap();
        assert_eq!(phi0, 2.0);
        assert_eq!(psi0, 0.0);

        let (phi1, psi1) = hyperbolic_pair(1.0).unwrap();
        assert!((phi1 - 3.0861612696304874).abs() < 1e-14);
        assert!((psi1 - (-2.3504023872876028)).abs() < 1e-14);

        let mut rng = SplitMix64::new(3);
        for _ in 0..20 {
            let x = rng.range(-5.0, 5.0);
            let (phi_p, psi_p) = hyperbolic_pair(x).unwrap();
            let (phi_m, psi_m) = hyperbolic_pair(-x).unwrap();
            assert!((phi_p - phi_m).abs() < 1e-12 * phi_p.abs());
            assert!((psi_p + psi_m).abs() < 1e-12 * psi_p.abs().max(1.0));
        }

        assert!(hyperbolic_pair(800.0).is_err());
    }

    #[test]
    fn hyperbolic_pair_derivative_identities() {
        let h = 1e-6;
        for &x in &[-2.0, -0.3, 0.0, 0.7, 1.9] {
            let (phi_p, _) = hyperbolic_pair(x + h).unwrap();
            let (phi_m, _) = hyperbolic_pair(x - h).unwrap();
            let (phi, psi) = hyperbolic_pair(x).unwrap();
            let dphi = (phi_p - phi_m) / (2.0 * h);
            assert!((dphi + psi).abs() < 1e-7, "phi' = -psi fails at {x}");
            let (_, psi_p) = hyperbolic_pair(x + h).unwrap();
            let (_, psi_m) = hyperbolic_pair(x - h).unwrap();
            let dpsi = (psi_p - psi_m) / (2.0 * h);
            assert!((dpsi + phi).abs() < 1e-7, "psi' = -phi fails at {x}");
        }
    }

    #[test]
    fn presets_vanish_outside_support() {
        for preset in [Preset::BumpF, Preset::BumpG, Preset::BumpBoth, Preset::Thm2] {
            let data = preset_data(preset, 1.5, (1.0, 1.0)).unwrap();
            let mut rng = SplitMix64::new(11);
            for _ in 0..50 {
                let sign = if rng.next_f64() < 0.5 { -1.0 } else { 1.0 };
                let x = sign * rng.range(1.5, 20.0);
                assert_eq!(data.f(x), 0.0);
                assert_eq!(data.g(x), 0.0);
                assert_eq!(data.f_prime(x), 0.0);
            }
        }
    }

    #[test]
    fn preset_zero_and_bump_values() {
        let zero = preset_data(Preset::Zero, 1.0, (1.0, 1.0)).unwrap();
        assert_eq!(zero.f(0.3), 0.0);
        assert_eq!(zero.g(0.0), 0.0);

        let bf = preset_data(Preset::BumpF, 1.0, (1.0, 1.0)).unwrap();
        assert_eq!(bf.f(0.0), 1.0);
        assert_eq!(bf.f(1.0), 0.0);
        assert_eq!(bf.f(-1.0), 0.0);
        assert_eq!(bf.g(0.2), 0.0);

        assert!(preset_data(Preset::BumpF, 0.5, (1.0, 1.0)).is_err());
    }

    #[test]
    fn bump_regularity_across_support_boundary() {
        let data = preset_data(Preset::BumpBoth, 1.0, (1.0, 1.0)).unwrap();
        // f'' and g' must be continuous at |x| = R; both vanish there, so the
        // one-sided values must tend to zero.
        for h in [1e-2, 1e-3, 1e-4] {
            assert!(data.f_second(1.0 - h).abs() < 60.0 * h);
            assert!(data.g_prime(1.0 - h).abs() < 10.0 * h);
            assert_eq!(data.f_second(1.0 + h), 0.0);
            assert_eq!(data.g_prime(1.0 + h), 0.0);
        }
    }

    #[test]
    fn bump_derivatives_match_finite_differences() {
        let data = preset_data(Preset::BumpBoth, 1.3, (0.7, 1.0)).unwrap();
        let h = 1e-6;
        for &x in &[-1.1, -0.4, 0.0, 0.33, 0.9, 1.2] {
            let fd1 = (data.f(x + h) - data.f(x - h)) / (2.0 * h);
            assert!((fd1 - data.f_prime(x)).abs() < 1e-8);
            let fd2 = (data.f_prime(x + h) - data.f_prime(x - h)) / (2.0 * h);
            assert!((fd2 - data.f_second(x)).abs() < 1e-7);
            let fdg = (data.g_antiderivative(x + h) - data.g_antiderivative(x - h)) / (2.0 * h);
            assert!((fdg - data.g(x)).abs() < 1e-8);
        }
    }

    #[test]
    fn thm2_moments_verified_by_quadrature() {
        let data = preset_data(Preset::Thm2, 1.0, (1.0, 1.0)).unwrap();
        let (first, second) = thm2_moments(&data, 10_000);
        assert!(first.abs() < 1e-12, "f = 0 so the first moment vanishes");
        assert!(second > 0.0);
        // Integration by parts: int psi g' = int phi g.
        let by_parts = trapezoid(
            |x| hyperbolic_pair_raw(x).0 * data.g(x),
            -1.0,
            1.0,
            10_000,
        );
        assert!((second - by_parts).abs() < 1e-8 * by_parts.abs());
    }

    #[test]
    fn free_solution_zero_data_and_initial_condition() {
        let zero = preset_data(Preset::Zero, 1.0, (1.0, 1.0)).unwrap();
        let s = free_solution(&zero, 0.3, 0.2, 1.7);
        assert_eq!((s.u, s.ux, s.ut, s.uxx), (0.0, 0.0, 0.0, 0.0));

        let data = preset_data(Preset::BumpBoth, 1.0, (1.0, 1.0)).unwrap();
        let eps = 0.25;
        for &x in &[-0.8, 0.0, 0.5] {
            let s = free_solution(&data, eps, x, 0.0);
            assert!((s.u - eps * data.f(x)).abs() < 1e-15);
            assert!((s.ut - eps * data.g(x)).abs() < 1e-15);
            assert!((s.ux - eps * data.f_prime(x)).abs() < 1e-15);
        }
    }

    #[test]
    fn free_solution_interior_plateau_from_bump_g() {
        // Once t >= R + 1 the value at x = 0 is (eps/2) * total mass of g,
        // constant in t.
        let data = preset_data(Preset::BumpG, 1.0, (1.0, 1.0)).unwrap();
        let eps = 0.5;
        let expected = 0.5 * eps * data.g_total();
        for &t in &[2.0, 3.5, 10.0] {
            let s = free_solution(&data, eps, 0.0, t);
            assert!((s.u - expected).abs() < 1e-14, "t = {t}");
        }
        // Oracle for the mass itself: quadrature of the preset polynomial.
        let mass = trapezoid(|y| data.g(y), -1.0, 1.0, 200_000);
        assert!((mass - data.g_total()).abs() < 1e-9);
    }

    #[test]
    fn free_solution_vanishes_outside_cone() {
        let data = preset_data(Preset::BumpBoth, 1.0, (1.0, 1.0)).unwrap();
        let cone = LightCone::new(1.0);
        for &t in &[0.0, 0.7, 2.3] {
            for &x in &[t + 1.0 + 1e-9, -(t + 1.0 + 1e-9), t + 4.0] {
                assert!(!cone.contains(x, t));
                let s = free_solution(&data, 1.0, x, t);
                assert_eq!((s.u, s.ux, s.ut, s.uxx), (0.0, 0.0, 0.0, 0.0));
            }
        }
    }

    #[test]
    fn free_solution_satisfies_discrete_wave_equation() {
        // Centered differences at equal spacings annihilate any function
        // of x +/- t exactly, so the residual must sit at rounding level,
        // far below the C h^2 budget.
        let data = preset_data(Preset::BumpBoth, 1.0, (1.0, 1.0)).unwrap();
        let eps = 1.0;
        let residual = |h: f64| {
            let mut worst: f64 = 0.0;
            let mut rng = SplitMix64::new(5);
            for _ in 0..60 {
                let x = rng.range(-2.0, 2.0);
                let t = rng.range(0.5, 1.5);
                let at = |x: f64, t: f64| free_solution(&data, eps, x, t).u;
                let utt = (at(x, t + h) - 2.0 * at(x, t) + at(x, t - h)) / (h * h);
                let uxx = (at(x + h, t) - 2.0 * at(x, t) + at(x - h, t)) / (h * h);
                worst = worst.max((utt - uxx).abs());
            }
            worst
        };
        for h in [1e-2, 5e-3] {
            let r = residual(h);
            assert!(r <= 1.0 * h * h, "residual {r} exceeds h^2 budget at h = {h}");
            assert!(r < 1e-9, "residual {r} above rounding scale at h = {h}");
        }
    }

    #[test]
    fn problem_spec_validation() {
        assert!(ProblemSpec::new(2.0, 0.0, 0.1, 1.0, Preset::BumpBoth).is_ok());
        assert!(ProblemSpec::new(1.0, 0.0, 0.1, 1.0, Preset::BumpBoth).is_err());
        assert!(ProblemSpec::new(2.0, 0.0, 0.0, 1.0, Preset::BumpBoth).is_err());
        assert!(ProblemSpec::new(2.0, 0.0, 0.1, 0.9, Preset::BumpBoth).is_err());
        assert!(Preset::parse("nope").is_err());
        assert_eq!(Preset::parse("thm2").unwrap(), Preset::Thm2);
    }
}
