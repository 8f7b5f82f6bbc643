//! Characteristic-grid solver with unit CFL.
//!
//! The fields evolved are `v = u_t` and `w = u_x`. In Riemann-invariant
//! form `r = v + w` travels left and `s = v - w` travels right, both
//! satisfying `(d_t -+ d_x)(r, s) = N` with `N = |w|^p / <x>^a`. With
//! `dx = dt` the transport is exact on grid nodes, so the only
//! discretization error comes from integrating the source along
//! characteristics (Heun predictor-corrector) and from the trapezoidal
//! time-quadrature that reconstructs `u` from `v`.

use crate::error::{Error, Result};
use crate::model::{free_solution, weight, InitialData, ProblemSpec};
use crate::quad::{least_squares, SplitMix64};
use rayon::prelude::*;

use std::io::Write;

/// Window size below which level updates run serially.
const PAR_THRESHOLD: usize = 16_384;

#[derive(Debug, Clone, Copy)]
enum PowKind {
    Two,
    Three,
    ThreeHalves,
    General(f64),
}

fn pow_kind(p: f64) -> PowKind {
    if p == 2.0 {
        PowKind::Two
    } else if p == 3.0 {
        PowKind::Three
    } else if p == 1.5 {
        PowKind::ThreeHalves
    } else {
        PowKind::General(p)
    }
}

#[inline(always)]
fn pow_abs(x: f64, kind: PowKind) -> f64 {
    match kind {
        PowKind::Two => x * x,
        PowKind::Three => x * x * x.abs(),
        PowKind::ThreeHalves => {
            let a = x.abs();
            a * a.sqrt()
        }
        PowKind::General(p) => x.abs().powf(p),
    }
}

/// One stored time slice of the fields over the active window.
#[derive(Debug, Clone)]
pub struct FieldFrame {
    pub t: f64,
    pub delta: f64,
    /// Coordinate of the first stored node.
    pub x_left: f64,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub v: Vec<f64>,
}

impl FieldFrame {
    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_left + i as f64 * self.delta
    }

    fn interp(&self, values: &[f64], x: f64) -> f64 {
        let s = (x - self.x_left) / self.delta;
        if s <= 0.0 || s >= (values.len() - 1) as f64 {
            return 0.0;
        }
        let i = s.floor() as usize;
        let frac = s - i as f64;
        values[i] * (1.0 - frac) + values[i + 1] * frac
    }

    pub fn u_at(&self, x: f64) -> f64 {
        self.interp(&self.u, x)
    }

    pub fn w_at(&self, x: f64) -> f64 {
        self.interp(&self.w, x)
    }

    pub fn v_at(&self, x: f64) -> f64 {
        self.interp(&self.v, x)
    }
}

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RunStatus {
    Survived { t_max: f64 },
    BlewUp { t_cross: f64 },
}

impl RunStatus {
    pub fn blew_up(&self) -> bool {
        matches!(self, RunStatus::BlewUp { .. })
    }
}

/// History of one evolution: per-level maxima plus optional field frames.
#[derive(Debug, Clone)]
pub struct SolutionRun {
    pub spec: ProblemSpec,
    pub delta: f64,
    pub nonlinear: bool,
    pub times: Vec<f64>,
    pub max_ux: Vec<f64>,
    pub max_u: Vec<f64>,
    pub frames: Vec<FieldFrame>,
    pub status: RunStatus,
}

impl SolutionRun {
    /// First time `max|u_x|` reaches `threshold`.
    pub fn crossing_time(&self, threshold: f64) -> Option<f64> {
        self.max_ux
            .iter()
            .position(|&m| m >= threshold)
            .map(|k| self.times[k])
    }

    /// Stored frame closest to `t`.
    pub fn frame_near(&self, t: f64) -> Option<&FieldFrame> {
        self.frames
            .iter()
            .min_by(|a, b| (a.t - t).abs().partial_cmp(&(b.t - t).abs()).unwrap())
    }

    pub fn max_ux_at(&self, t: f64) -> Option<f64> {
        self.times
            .iter()
            .position(|&s| s >= t - 1e-12)
            .map(|k| self.max_ux[k])
    }

    /// Snapshot export with header `t,max_ux,max_u`.
    pub fn write_snapshot_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "t,max_ux,max_u")?;
        for k in 0..self.times.len() {
            writeln!(out, "{},{},{}", self.times[k], self.max_ux[k], self.max_u[k])?;
        }
        Ok(())
    }
}

/// Options for `evolve_with`.
#[derive(Debug, Clone)]
pub struct EvolveOptions {
    pub t_max: f64,
    pub blow_threshold: f64,
    /// Store a field frame every this many levels (level 0 included).
    pub frame_stride: Option<usize>,
    /// Evolve with the source switched off (free transport) when false.
    pub nonlinearity: bool,
    /// Cone-locality assertion cadence in levels; 0 disables.
    pub cone_check_every: usize,
    /// Reconstruct `u` alongside the derivative fields. Lifespan scans
    /// only watch `max|u_x|` and switch this off to save memory traffic.
    pub track_u: bool,
}

impl EvolveOptions {
    pub fn new(t_max: f64, blow_threshold: f64) -> Self {
        EvolveOptions {
            t_max,
            blow_threshold,
            frame_stride: None,
            nonlinearity: true,
            cone_check_every: 100,
            track_u: true,
        }
    }

    pub fn with_frames(mut self, stride: usize) -> Self {
        self.frame_stride = Some(stride.max(1));
        self
    }

    pub fn linear(mut self) -> Self {
        self.nonlinearity = false;
        self
    }
}

struct Grid {
    delta: f64,
    a: f64,
    /// Grid coordinate of index 0 in units of `delta`.
    i0: i64,
    lo: usize,
    hi: usize,
    w: Vec<f64>,
    v: Vec<f64>,
    u: Vec<f64>,
    w2: Vec<f64>,
    v2: Vec<f64>,
    u2: Vec<f64>,
    wt: Vec<f64>,
}

/// Fused level update over one output chunk. Index `k` writes node
/// `nlo + offset + k`; the source slices start two nodes to its left.
/// Returns the chunk maxima of `|w|` and `|u|`.
#[allow(clippy::too_many_arguments)]
fn level_kernel<P: Fn(f64) -> f64, const TRACK_U: bool>(
    pow: P,
    delta: f64,
    nonlinear: bool,
    sw: &[f64],
    sv: &[f64],
    su: &[f64],
    swt: &[f64],
    out_w: &mut [f64],
    out_v: &mut [f64],
    out_u: &mut [f64],
) -> (f64, f64) {
    let n = out_w.len();
    assert!(sw.len() >= n + 2 && sv.len() >= n + 2 && swt.len() >= n + 2);
    assert!(out_v.len() == n);
    if TRACK_U {
        assert!(su.len() >= n + 2 && out_u.len() == n);
    }
    let half = 0.5 * delta;
    let quarter = 0.25 * delta;
    let mut max_w: f64 = 0.0;
    let mut max_u: f64 = 0.0;
    for k in 0..n {
        let wl = sw[k];
        let wr = sw[k + 2];
        let vl = sv[k];
        let vr = sv[k + 2];
        let rp = vr + wr;
        let sm = vl - wl;
        let transport = 0.5 * (rp - sm);
        let (wn, vn);
        if nonlinear {
            let nl = swt[k] * pow(wl);
            let nr = swt[k + 2] * pow(wr);
            let wtilde = transport + half * (nr - nl);
            let ntilde = swt[k + 1] * pow(wtilde);
            wn = transport + quarter * (nr - nl);
            vn = 0.5 * (rp + sm) + quarter * (nr + nl) + half * ntilde;
        } else {
            wn = transport;
            vn = 0.5 * (rp + sm);
        }
        out_w[k] = wn;
        out_v[k] = vn;
        if TRACK_U {
            let un = su[k + 1] + half * (sv[k + 1] + vn);
            out_u[k] = un;
            max_u = max_u.max(un.abs());
        }
        max_w = max_w.max(wn.abs());
    }
    (max_w, max_u)
}

impl Grid {
    fn new(data: &InitialData, eps: f64, delta: f64, a: f64) -> Self {
        let support = (data.r / delta).ceil() as usize;
        let half = support + 1024;
        let len = 2 * half + 1;
        let i0 = -(half as i64);
        let mut grid = Grid {
            delta,
            a,
            i0,
            lo: half - support,
            hi: half + support,
            w: vec![0.0; len],
            v: vec![0.0; len],
            u: vec![0.0; len],
            w2: vec![0.0; len],
            v2: vec![0.0; len],
            u2: vec![0.0; len],
            wt: vec![0.0; len],
        };
        grid.fill_weights();
        for i in grid.lo..=grid.hi {
            let x = grid.x(i);
            grid.w[i] = eps * data.f_prime(x);
            grid.v[i] = eps * data.g(x);
            grid.u[i] = eps * data.f(x);
        }
        grid
    }

    #[inline]
    fn x(&self, i: usize) -> f64 {
        (self.i0 + i as i64) as f64 * self.delta
    }

    fn fill_weights(&mut self) {
        let (i0, delta, a) = (self.i0, self.delta, self.a);
        for (i, wt) in self.wt.iter_mut().enumerate() {
            *wt = weight((i0 + i as i64) as f64 * delta, a);
        }
    }

    fn ensure_capacity(&mut self) {
        if self.lo >= 3 && self.hi + 3 < self.w.len() {
            return;
        }
        let len = self.w.len();
        let pad = (len / 2).max(4096);
        let new_len = len + 2 * pad;
        let grow = |src: &mut Vec<f64>| {
            let mut next = vec![0.0; new_len];
            next[pad..pad + len].copy_from_slice(src);
            *src = next;
        };
        grow(&mut self.w);
        grow(&mut self.v);
        grow(&mut self.u);
        self.w2 = vec![0.0; new_len];
        self.v2 = vec![0.0; new_len];
        self.u2 = vec![0.0; new_len];
        self.wt = vec![0.0; new_len];
        self.i0 -= pad as i64;
        self.lo += pad;
        self.hi += pad;
        self.fill_weights();
    }

    /// Advance one level, returning the new window maxima of `|w|` and
    /// `|u|`. The window expands by one node per side, which matches the
    /// light cone exactly at unit CFL.
    fn step(&mut self, kind: PowKind, nonlinear: bool, track_u: bool) -> (f64, f64) {
        match (kind, track_u) {
            (PowKind::Two, true) => self.step_with::<_, true>(|x| x * x, nonlinear),
            (PowKind::Two, false) => self.step_with::<_, false>(|x| x * x, nonlinear),
            (PowKind::Three, true) => self.step_with::<_, true>(|x| x * x * x.abs(), nonlinear),
            (PowKind::Three, false) => self.step_with::<_, false>(|x| x * x * x.abs(), nonlinear),
            (PowKind::ThreeHalves, true) => self.step_with::<_, true>(
                |x| {
                    let a = x.abs();
                    a * a.sqrt()
                },
                nonlinear,
            ),
            (PowKind::ThreeHalves, false) => self.step_with::<_, false>(
                |x| {
                    let a = x.abs();
                    a * a.sqrt()
                },
                nonlinear,
            ),
            (PowKind::General(p), true) => self.step_with::<_, true>(|x| x.abs().powf(p), nonlinear),
            (PowKind::General(p), false) => {
                self.step_with::<_, false>(|x| x.abs().powf(p), nonlinear)
            }
        }
    }

    fn step_with<P: Fn(f64) -> f64 + Copy + Sync, const TRACK_U: bool>(
        &mut self,
        pow: P,
        nonlinear: bool,
    ) -> (f64, f64) {
        let delta = self.delta;
        let nlo = self.lo - 1;
        let nhi = self.hi + 1;
        let n = nhi - nlo + 1;
        let maxima = {
            let sw = &self.w[nlo - 1..];
            let sv = &self.v[nlo - 1..];
            let su = &self.u[nlo - 1..];
            let swt = &self.wt[nlo - 1..];
            let ow = &mut self.w2[nlo..=nhi];
            let ov = &mut self.v2[nlo..=nhi];
            let ou = &mut self.u2[nlo..=nhi];
            if n >= PAR_THRESHOLD {
                const CHUNK: usize = 8192;
                ow.par_chunks_mut(CHUNK)
                    .zip(ov.par_chunks_mut(CHUNK))
                    .zip(ou.par_chunks_mut(CHUNK))
                    .enumerate()
                    .map(|(ci, ((cw, cv), cu))| {
                        let off = ci * CHUNK;
                        let len = cw.len();
                        level_kernel::<_, TRACK_U>(
                            pow,
                            delta,
                            nonlinear,
                            &sw[off..off + len + 2],
                            &sv[off..off + len + 2],
                            &su[off..off + len + 2],
                            &swt[off..off + len + 2],
                            cw,
                            cv,
                            cu,
                        )
                    })
                    .reduce(|| (0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)))
            } else {
                level_kernel::<_, TRACK_U>(pow, delta, nonlinear, sw, sv, su, swt, ow, ov, ou)
            }
        };
        self.lo = nlo;
        self.hi = nhi;
        std::mem::swap(&mut self.w, &mut self.w2);
        std::mem::swap(&mut self.v, &mut self.v2);
        if TRACK_U {
            std::mem::swap(&mut self.u, &mut self.u2);
        }
        maxima
    }

    fn assert_cone(&self, t: f64, r: f64) {
        for i in 0..self.lo {
            assert!(
                self.w[i] == 0.0 && self.v[i] == 0.0,
                "cone violation left of window at t = {t}"
            );
        }
        for i in self.hi + 1..self.w.len() {
            assert!(
                self.w[i] == 0.0 && self.v[i] == 0.0,
                "cone violation right of window at t = {t}"
            );
        }
        // The window itself must sit inside |x| <= t + R (+ one cell).
        assert!(self.x(self.lo) >= -(t + r) - 1.5 * self.delta);
        assert!(self.x(self.hi) <= (t + r) + 1.5 * self.delta);
    }

    fn frame(&self, t: f64) -> FieldFrame {
        FieldFrame {
            t,
            delta: self.delta,
            x_left: self.x(self.lo),
            u: self.u[self.lo..=self.hi].to_vec(),
            w: self.w[self.lo..=self.hi].to_vec(),
            v: self.v[self.lo..=self.hi].to_vec(),
        }
    }
}

/// Evolves the problem to `t_max` or until `max|u_x|` reaches
/// `blow_threshold`, whichever comes first.
pub fn evolve(spec: &ProblemSpec, delta: f64, t_max: f64, blow_threshold: f64) -> Result<SolutionRun> {
    evolve_with(spec, delta, &EvolveOptions::new(t_max, blow_threshold))
}

pub fn evolve_with(spec: &ProblemSpec, delta: f64, opts: &EvolveOptions) -> Result<SolutionRun> {
    spec.validate()?;
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!("delta must be > 0, got {delta}")));
    }
    if !(opts.t_max > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "t_max must be > 0, got {}",
            opts.t_max
        )));
    }
    if !(opts.blow_threshold > 0.0) {
        return Err(Error::InvalidParameter(
            "blow_threshold must be > 0".to_string(),
        ));
    }
    let data = spec.data()?;
    let kind = pow_kind(spec.p);
    let n_levels = ((opts.t_max / delta).round() as usize).max(1);

    let mut grid = Grid::new(&data, spec.eps, delta, spec.a);
    let mut times = Vec::with_capacity(n_levels + 1);
    let mut max_ux = Vec::with_capacity(n_levels + 1);
    let mut max_u = Vec::with_capacity(n_levels + 1);
    let mut frames = Vec::new();

    let (mw0, mu0) = (grid.lo..=grid.hi).fold((0.0f64, 0.0f64), |(mw, mu), i| {
        (mw.max(grid.w[i].abs()), mu.max(grid.u[i].abs()))
    });
    times.push(0.0);
    max_ux.push(mw0);
    max_u.push(mu0);
    if opts.frame_stride.is_some() {
        frames.push(grid.frame(0.0));
    }

    let track_u = opts.track_u || opts.frame_stride.is_some();
    let mut status = None;
    for lev in 1..=n_levels {
        grid.ensure_capacity();
        let (mw, mu) = grid.step(kind, opts.nonlinearity, track_u);
        let t = lev as f64 * delta;

        if mw >= opts.blow_threshold {
            if mw.is_finite() && mu.is_finite() {
                times.push(t);
                max_ux.push(mw);
                max_u.push(mu);
            }
            status = Some(RunStatus::BlewUp { t_cross: t });
            break;
        }
        if !mw.is_finite() || !mu.is_finite() {
            return Err(Error::NumericalFailure {
                t,
                what: "non-finite field value below blow-up threshold".to_string(),
            });
        }
        times.push(t);
        max_ux.push(mw);
        max_u.push(mu);

        if let Some(stride) = opts.frame_stride {
            if lev % stride == 0 {
                frames.push(grid.frame(t));
            }
        }
        if opts.cone_check_every > 0 && lev % opts.cone_check_every == 0 {
            grid.assert_cone(t, spec.r);
        }
    }

    let status = status.unwrap_or(RunStatus::Survived {
        t_max: n_levels as f64 * delta,
    });
    Ok(SolutionRun {
        spec: spec.clone(),
        delta,
        nonlinear: opts.nonlinearity,
        times,
        max_ux,
        max_u,
        frames,
        status,
    })
}

/// Duhamel area operator: trapezoid quadrature of
/// `(1/2) int_0^t ds int_{x-t+s}^{x+t-s} field(y,s) <y>^(-a) dy`
/// over the backward light triangle.
pub fn duhamel_area<F: Fn(f64, f64) -> f64>(field: F, x: f64, t: f64, a: f64, quad_n: usize) -> f64 {
    assert!(t >= 0.0, "duhamel_area needs t >= 0");
    assert!(quad_n >= 2, "duhamel_area needs quad_n >= 2");
    if t == 0.0 {
        return 0.0;
    }
    let h = t / quad_n as f64;
    let mut outer = 0.0;
    for j in 0..=quad_n {
        let s = j as f64 * h;
        let half_width = t - s;
        let inner = if half_width <= 0.0 {
            0.0
        } else {
            let n_y = ((2.0 * half_width / h).ceil() as usize).max(1);
            let y0 = x - half_width;
            let y1 = x + half_width;
            let hy = (y1 - y0) / n_y as f64;
            let mut acc = 0.5 * (field(y0, s) * weight(y0, a) + field(y1, s) * weight(y1, a));
            for k in 1..n_y {
                let y = y0 + k as f64 * hy;
                acc += field(y, s) * weight(y, a);
            }
            acc * hy
        };
        let w_outer = if j == 0 || j == quad_n { 0.5 } else { 1.0 };
        outer += w_outer * inner;
    }
    0.5 * outer * h
}

/// Space-time interpolation view over a run's stored frames.
pub struct FrameField<'a> {
    run: &'a SolutionRun,
    dt: f64,
}

impl<'a> FrameField<'a> {
    pub fn new(run: &'a SolutionRun) -> Result<Self> {
        if run.frames.len() < 2 {
            return Err(Error::TooFewSamples {
                needed: 2,
                got: run.frames.len(),
            });
        }
        let dt = run.frames[1].t - run.frames[0].t;
        Ok(FrameField { run, dt })
    }

    fn lookup<G: Fn(&FieldFrame, f64) -> f64>(&self, get: G, x: f64, s: f64) -> f64 {
        let frames = &self.run.frames;
        let pos = s / self.dt;
        let j = (pos.floor() as usize).min(frames.len() - 2);
        let frac = (pos - j as f64).clamp(0.0, 1.0);
        let lo = get(&frames[j], x);
        let hi = get(&frames[j + 1], x);
        lo * (1.0 - frac) + hi * frac
    }

    pub fn w(&self, x: f64, s: f64) -> f64 {
        self.lookup(|fr, x| fr.w_at(x), x, s)
    }

    pub fn u(&self, x: f64, s: f64) -> f64 {
        self.lookup(|fr, x| fr.u_at(x), x, s)
    }

    pub fn horizon(&self) -> f64 {
        self.run.frames.last().map(|f| f.t).unwrap_or(0.0)
    }
}

/// Residuals `u - eps u0 - L_a(|u_x|^p)` of the integral representation at
/// `n_points` random cone-interior points of a surviving run with frames.
pub fn representation_residuals(run: &SolutionRun, n_points: usize, seed: u64) -> Result<Vec<f64>> {
    let field = FrameField::new(run)?;
    let data = run.spec.data()?;
    let p = run.spec.p;
    let a = run.spec.a;
    let horizon = field.horizon();
    let mut rng = SplitMix64::new(seed);
    let mut residuals = Vec::with_capacity(n_points);
    for _ in 0..n_points {
        // Frame times and grid nodes keep the quadrature on stored values.
        let j = {
            let lo = (0.3 * (run.frames.len() - 1) as f64).floor() as usize;
            lo + rng.index(run.frames.len() - lo)
        };
        let frame = &run.frames[j];
        let t = frame.t;
        if t <= 0.0 {
            continue;
        }
        let reach = 0.9 * (t + run.spec.r);
        let i_max = ((reach - frame.x_left) / frame.delta).floor() as usize;
        let i_min = ((-reach - frame.x_left) / frame.delta).ceil() as usize;
        let i = i_min + rng.index((i_max - i_min).max(1));
        let x = frame.x(i);

        let quad_n = ((t / run.delta).round() as usize).max(2);
        let duhamel = duhamel_area(|y, s| pow_abs(field.w(y, s), pow_kind(p)), x, t, a, quad_n);
        let free = free_solution(&data, run.spec.eps, x, t);
        residuals.push(frame.u[i] - free.u - duhamel);
    }
    let _ = horizon;
    Ok(residuals)
}

/// Sup-norm error of the run's `u` against the exact free solution at the
/// stored frame closest to `t` (meaningful for linear runs).
pub fn sup_error_vs_free(run: &SolutionRun, t: f64) -> Result<f64> {
    let frame = run.frame_near(t).ok_or(Error::TooFewSamples { needed: 1, got: 0 })?;
    let data = run.spec.data()?;
    let mut worst: f64 = 0.0;
    for i in 0..frame.len() {
        let exact = free_solution(&data, run.spec.eps, frame.x(i), frame.t);
        worst = worst.max((frame.u[i] - exact.u).abs());
    }
    Ok(worst)
}

/// Settings for lifespan estimation: base grid, horizon and the blow-up
/// thresholds used for crossing-time extrapolation.
#[derive(Debug, Clone)]
pub struct LifespanSettings {
    pub delta0: f64,
    pub t_max: f64,
    pub thresholds: Vec<f64>,
}

impl Default for LifespanSettings {
    fn default() -> Self {
        LifespanSettings {
            delta0: 1.0 / 400.0,
            t_max: 100.0,
            thresholds: vec![1e3, 4e3, 1.6e4],
        }
    }
}

/// Blow-up time estimate with threshold-extrapolation and grid-refinement
/// diagnostics. A survived run is encoded as `t_star = +inf`, `t_lo = t_max`.
#[derive(Debug, Clone)]
pub struct LifespanEstimate {
    pub t_star: f64,
    pub t_lo: f64,
    pub t_hi: f64,
    pub thresholds_used: Vec<f64>,
    pub refinement_ratio: f64,
    pub delta_finest: f64,
}

impl LifespanEstimate {
    pub fn survived(&self) -> bool {
        !self.t_star.is_finite()
    }
}

/// Runs `evolve` at `delta0`, `delta0/2`, `delta0/4`, records the crossing
/// time of each threshold and extrapolates `t*` as the intercept of the
/// crossing times against `1/log(threshold)` on the finest grid.
pub fn estimate_lifespan(spec: &ProblemSpec, settings: &LifespanSettings) -> Result<LifespanEstimate> {
    let thresholds = &settings.thresholds;
    if thresholds.len() < 3 {
        return Err(Error::InvalidParameter(
            "need at least 3 thresholds".to_string(),
        ));
    }
    if thresholds.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "thresholds must be strictly increasing".to_string(),
        ));
    }
    let theta_max = *thresholds.last().unwrap();
    let deltas = [settings.delta0, settings.delta0 / 2.0, settings.delta0 / 4.0];
    let mut extrapolated = Vec::new();
    let mut finest_crossings: Option<Vec<f64>> = None;

    for (gi, &delta) in deltas.iter().enumerate() {
        let mut opts = EvolveOptions::new(settings.t_max, theta_max);
        opts.track_u = false;
        let run = evolve_with(spec, delta, &opts)?;
        let crossings: Vec<Option<f64>> = thresholds.iter().map(|&th| run.crossing_time(th)).collect();
        if crossings.iter().any(|c| c.is_none()) {
            if gi == deltas.len() - 1 {
                // Finest grid decides: not all thresholds crossed => survived.
                return Ok(LifespanEstimate {
                    t_star: f64::INFINITY,
                    t_lo: settings.t_max,
                    t_hi: f64::INFINITY,
                    thresholds_used: thresholds.clone(),
                    refinement_ratio: f64::NAN,
                    delta_finest: delta,
                });
            }
            extrapolated.push(f64::NAN);
            continue;
        }
        let ts: Vec<f64> = crossings.into_iter().map(|c| c.unwrap()).collect();
        let xs: Vec<f64> = thresholds.iter().map(|&th| 1.0 / th.ln()).collect();
        let (_, intercept, _, _) = least_squares(&xs, &ts);
        extrapolated.push(intercept);
        if gi == deltas.len() - 1 {
            finest_crossings = Some(ts);
        }
    }

    let crossings = finest_crossings.expect("finest grid crossed all thresholds");
    let t_last = *crossings.last().unwrap();
    let width = t_last - crossings[0];
    let t_star_fine = extrapolated[2];
    let t_star = t_star_fine.max(t_last);
    let spread_ok = width <= 0.05 * t_star;
    let t_hi = if spread_ok {
        t_star + width
    } else {
        t_star + 2.0 * width
    };
    let refinement_ratio = if extrapolated.iter().all(|e| e.is_finite()) {
        let d01 = (extrapolated[0] - extrapolated[1]).abs();
        let d12 = (extrapolated[1] - extrapolated[2]).abs();
        if d12 > 1e-300 {
            d01 / d12
        } else {
            f64::NAN
        }
    } else {
        f64::NAN
    };

    Ok(LifespanEstimate {
        t_star,
        t_lo: t_last,
        t_hi,
        thresholds_used: thresholds.clone(),
        refinement_ratio,
        delta_finest: deltas[2],
    })
}

fn rational_approx(x: f64) -> (u32, u32) {
    // Continued-fraction convergents; good enough for grid spacings.
    let mut num = (1u64, 0u64);
    let mut den = (0u64, 1u64);
    let mut frac = x;
    for _ in 0..40 {
        let a = frac.floor() as u64;
        let next_num = a * num.0 + num.1;
        let next_den = a * den.0 + den.1;
        if next_num > u32::MAX as u64 || next_den > u32::MAX as u64 {
            break;
        }
        num = (next_num, num.0);
        den = (next_den, den.0);
        let rem = frac - a as f64;
        if rem.abs() < 1e-12 {
            break;
        }
        frac = 1.0 / rem;
        if (num.0 as f64 / den.0 as f64 - x).abs() <= 1e-12 * x.abs() {
            break;
        }
    }
    (num.0 as u32, den.0.max(1) as u32)
}

/// Binary field dump: a 3-integer little-endian u64 header
/// `[frame count, node count, spacing]` - spacing packs the rational
/// `numerator/denominator` of `delta` into the high/low 32 bits - followed
/// by the `u`, `w`, `v` blocks, each `frame count x node count` row-major
/// little-endian f64 on a symmetric grid around x = 0.
pub fn write_field_dump<W: Write>(run: &SolutionRun, out: &mut W) -> Result<()> {
    if run.frames.is_empty() {
        return Err(Error::EmptyResults);
    }
    let delta = run.delta;
    let mut half = 0usize;
    for frame in &run.frames {
        let right = frame.x_left + (frame.len() - 1) as f64 * delta;
        let need = (frame.x_left.abs().max(right.abs()) / delta).round() as usize;
        half = half.max(need);
    }
    let nodes = 2 * half + 1;
    let (num, den) = rational_approx(delta);
    let spacing = ((num as u64) << 32) | den as u64;
    out.write_all(&(run.frames.len() as u64).to_le_bytes())?;
    out.write_all(&(nodes as u64).to_le_bytes())?;
    out.write_all(&spacing.to_le_bytes())?;

    let mut row = vec![0.0f64; nodes];
    for pick in [0usize, 1, 2] {
        for frame in &run.frames {
            row.iter_mut().for_each(|v| *v = 0.0);
            let offset = ((frame.x_left / delta).round() as i64 + half as i64) as usize;
            let values = match pick {
                0 => &frame.u,
                1 => &frame.w,
                _ => &frame.v,
            };
            row[offset..offset + values.len()].copy_from_slice(values);
            for v in &row {
                out.write_all(&v.to_le_bytes())?;
            }
        }
    }
    Ok(())
}
