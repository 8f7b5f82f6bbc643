//! Blow-up ODE laboratory: iteration sequences and their closed forms,
//! the closed-form lifespan bounds they produce, and integrators for the
//! equality forms of the two differential inequalities. A bound is
//! certified at a parameter point when the equality ODE escapes to 1e12
//! no later than the bound predicts (margin >= 1).

use crate::error::{Error, Result};
use rayon::prelude::*;

use std::io::Write;

/// Slicing products `l_n`, partial geometric sums `k_n` and the ratio
/// powers `b_n = (l_n / l_{n+1})^{p^n}`.
#[derive(Debug, Clone)]
pub struct Products {
    pub l: Vec<f64>,
    pub l_inf: f64,
    pub k: Vec<f64>,
    pub k_inf: f64,
    pub b: Vec<f64>,
    pub n0: u32,
}

/// Smallest `n >= 1` with `b_m >= (1/2)^(p^n)` for every `m` up to the
/// scan cap 200. The ratios tend to one, so the tail is safe.
pub fn compute_n0(p: f64) -> u32 {
    let ln2 = std::f64::consts::LN_2;
    'outer: for n in 1..=64u32 {
        let budget = p.powi(n as i32) * ln2;
        for m in 1..=200u32 {
            let lhs = p.powi(m as i32) * (2.0 * p).powi(-(m as i32 + 1)).ln_1p();
            if lhs > budget {
                continue 'outer;
            }
        }
        return n;
    }
    64
}

pub fn products(p: f64, n_max: usize) -> Products {
    let mut l = Vec::with_capacity(n_max + 1);
    let mut running = 1.0;
    for i in 1..=n_max + 1 {
        running *= 1.0 + (2.0 * p).powi(-(i as i32));
        l.push(running);
    }
    let mut l_inf = running;
    let mut i = n_max + 2;
    loop {
        let factor = (2.0 * p).powi(-(i as i32));
        if factor < 1e-17 {
            break;
        }
        l_inf *= 1.0 + factor;
        i += 1;
    }
    let mut k = Vec::with_capacity(n_max + 1);
    let mut acc = 0.0;
    for n in 0..=n_max {
        acc += 0.5f64.powi(n as i32);
        k.push(acc);
    }
    let b: Vec<f64> = (1..=n_max)
        .map(|n| (-(p.powi(n as i32)) * (2.0 * p).powi(-(n as i32 + 1)).ln_1p()).exp())
        .collect();
    Products {
        l,
        l_inf,
        k,
        k_inf: 2.0,
        b,
        n0: compute_n0(p),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeqKind {
    /// Exponent pair of the polynomial iteration.
    Lem1Abc,
    /// Exponents of the Li-Zhou iteration, case `a <= 0`.
    LizhouMk,
    /// Exponent pair of the Li-Zhou iteration, case `0 < a < 1`.
    LizhouHjt,
    /// Log-power exponents of the critical Li-Zhou iteration.
    LizhouQl,
    /// Slicing products and partial sums.
    Products,
}

#[derive(Debug, Clone)]
pub struct SeqRow {
    pub n: u32,
    pub recurrence: Vec<f64>,
    pub closed: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SequenceTable {
    pub kind: SeqKind,
    pub labels: Vec<&'static str>,
    pub rows: Vec<SeqRow>,
    pub l_inf: f64,
    pub k_inf: f64,
    pub n0: u32,
}

/// Evaluates one sequence family both by its recurrence and by the
/// closed form, for `n` up to `n_max`.
pub fn seq_eval(kind: SeqKind, p: f64, a: f64, n_max: usize) -> Result<SequenceTable> {
    if !(p > 1.0) {
        return Err(Error::InvalidParameter(format!("p must be > 1, got {p}")));
    }
    if n_max < 1 {
        return Err(Error::InvalidParameter("n_max must be >= 1".to_string()));
    }
    let prods = products(p, n_max + 1);
    let mut rows = Vec::new();
    match kind {
        SeqKind::Lem1Abc => {
            let mut an = (1.0 - a) / p + 2.0;
            let mut bn = 0.0;
            for n in 1..=n_max {
                let pw = p.powi(n as i32 - 1);
                let a_closed = -(2.0 * p + 1.0 - a) / (1.0 - p) * pw + (2.0 * p + 1.0 - a) / (p * (1.0 - p));
                let b_closed = -2.0 * p / (1.0 - p) * pw + 2.0 * p / (1.0 - p);
                rows.push(SeqRow {
                    n: n as u32,
                    recurrence: vec![an, bn],
                    closed: vec![a_closed, b_closed],
                });
                an = p * an + 2.0 + (1.0 - a) / p;
                bn = p * bn + 2.0 * p;
            }
        }
        SeqKind::LizhouMk => {
            let mut mn = 0.0;
            for n in 1..=n_max {
                let closed = (1.0 - a) * (p.powi(n as i32 - 1) - 1.0) / (p - 1.0);
                rows.push(SeqRow {
                    n: n as u32,
                    recurrence: vec![mn],
                    closed: vec![closed],
                });
                mn = mn * p + 1.0 - a;
            }
        }
        SeqKind::LizhouHjt => {
            let mut hn = 0.0;
            let mut jn = 0.0;
            for n in 1..=n_max {
                let pw = p.powi(n as i32 - 1);
                rows.push(SeqRow {
                    n: n as u32,
                    recurrence: vec![hn, jn],
                    closed: vec![(pw - 1.0) / (p - 1.0), a * (pw - 1.0) / (p - 1.0)],
                });
                hn = hn * p + 1.0;
                jn = jn * p + a;
            }
        }
        SeqKind::LizhouQl => {
            let mut qn = 0.0;
            for n in 0..=n_max {
                let closed = (p.powi(n as i32) - 1.0) / (p - 1.0);
                rows.push(SeqRow {
                    n: n as u32,
                    recurrence: vec![qn],
                    closed: vec![closed],
                });
                qn = qn * p + 1.0;
            }
        }
        SeqKind::Products => {
            for n in 1..=n_max {
                let l_rec = prods.l[n - 1];
                let b_rec = (prods.l[n - 1] / prods.l[n]).powf(p.powi(n as i32));
                let k_rec = prods.k[n];
                // Independent closed routes: l via summed logs, k as a
                // geometric tail, b in log form.
                let l_closed = (1..=n)
                    .map(|i| (2.0 * p).powi(-(i as i32)).ln_1p())
                    .sum::<f64>()
                    .exp();
                let k_closed = 2.0 - 0.5f64.powi(n as i32);
                let b_closed = prods.b[n - 1];
                rows.push(SeqRow {
                    n: n as u32,
                    recurrence: vec![l_rec, k_rec, b_rec],
                    closed: vec![l_closed, k_closed, b_closed],
                });
            }
        }
    }
    for row in &rows {
        for v in row.recurrence.iter().chain(&row.closed) {
            if !v.is_finite() {
                return Err(Error::OutOfDomain(format!(
                    "sequence overflow at n = {}",
                    row.n
                )));
            }
        }
    }
    let labels = match kind {
        SeqKind::Lem1Abc => vec!["a_n", "b_n"],
        SeqKind::LizhouMk => vec!["m_n"],
        SeqKind::LizhouHjt => vec!["h_n", "j_n"],
        SeqKind::LizhouQl => vec!["q_n"],
        SeqKind::Products => vec!["l_n", "k_n", "b_n"],
    };
    Ok(SequenceTable {
        kind,
        labels,
        rows,
        l_inf: prods.l_inf,
        k_inf: prods.k_inf,
        n0: prods.n0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lemma {
    /// Polynomial-weight iteration bound (subcritical).
    PowerIteration,
    /// Extended Li-Zhou bound for the damped inequality.
    LiZhou,
    /// Imported log-refined slicing bound.
    LogSlicing,
}

impl Lemma {
    pub fn name(&self) -> &'static str {
        match self {
            Lemma::PowerIteration => "power",
            Lemma::LiZhou => "lizhou",
            Lemma::LogSlicing => "log_slicing",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Lemma3Inputs {
    pub big_a: f64,
    pub big_b: f64,
    pub r: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub p: f64,
}

#[derive(Debug, Clone)]
pub enum LemmaInputs {
    Power { d1: f64, d2: f64, p: f64, a: f64 },
    LiZhou { m1: f64, m2: f64, p: f64, a: f64 },
    LogSlicing(Lemma3Inputs),
}

impl LemmaInputs {
    /// First two scalar parameters for CSV rows.
    pub fn params(&self) -> (f64, f64, f64, f64) {
        match self {
            LemmaInputs::Power { d1, d2, p, a } => (*p, *a, *d1, *d2),
            LemmaInputs::LiZhou { m1, m2, p, a } => (*p, *a, *m1, *m2),
            LemmaInputs::LogSlicing(i) => (i.p, i.a, i.big_a, i.big_b),
        }
    }
}

/// A lemma's closed-form bound plus, when the equality ODE was run, the
/// observed escape time and the certification margin.
#[derive(Debug, Clone)]
pub struct BoundReport {
    pub lemma: Lemma,
    pub inputs: LemmaInputs,
    pub constant: f64,
    pub t_bound: f64,
    pub t_observed: Option<f64>,
    pub margin: Option<f64>,
    pub richardson_rel: Option<f64>,
    /// The printed side relation `t_bound > 2E`; recorded, never asserted.
    pub side_condition_2e: Option<bool>,
}

/// Closed-form bound `(D / D1)^{(p-1)/(1-a)}` of the polynomial
/// iteration lemma.
pub fn lemma1_bound(d1: f64, d2: f64, p: f64, a: f64) -> Result<BoundReport> {
    if a >= 1.0 {
        return Err(Error::InvalidParameter(format!("a >= 1 rejected, got {a}")));
    }
    if !(p > 1.0 && d1 > 0.0 && d2 > 0.0) {
        return Err(Error::InvalidParameter(
            "need p > 1 and positive D1, D2".to_string(),
        ));
    }
    let pm1 = p - 1.0;
    let d = p.powf(2.0 * p / (pm1 * pm1))
        * 2.0f64.powf((2.0 * p + 1.0 - a) / pm1)
        * (2.0 * p + 1.0 - a).powf(2.0 / pm1)
        / (d2 * pm1 * pm1).powf(1.0 / pm1);
    let t_bound = (d / d1).powf(pm1 / (1.0 - a));
    Ok(BoundReport {
        lemma: Lemma::PowerIteration,
        inputs: LemmaInputs::Power { d1, d2, p, a },
        constant: d,
        t_bound,
        t_observed: None,
        margin: None,
        richardson_rel: None,
        side_condition_2e: None,
    })
}

/// Closed-form bound of the extended Li-Zhou lemma, with its three-case
/// constant; `(M/M1)^{(p-1)/(1-a)}` below the critical weight and
/// `exp((M/M1)^{p-1})` at it.
pub fn lizhou_bound(m1: f64, m2: f64, p: f64, a: f64) -> Result<BoundReport> {
    if a > 1.0 {
        return Err(Error::InvalidParameter(format!("a > 1 rejected, got {a}")));
    }
    if !(p > 1.0 && m1 > 0.0 && m2 > 0.0) {
        return Err(Error::InvalidParameter(
            "need p > 1 and positive M1, M2".to_string(),
        ));
    }
    let pm1 = p - 1.0;
    let n0 = compute_n0(p);
    let pn0 = p.powi(n0 as i32);
    let m = if a <= 0.0 {
        (2.0 * p).powf((4.0 * p - 2.0) / (pm1 * pm1))
            * 2.0f64.powf((1.0 - a) * (pm1 + pn0) / (pm1 * pm1))
            * (1.0 - a).powf(1.0 / pm1)
            * (m2 * pm1).powf(-1.0 / pm1)
    } else if a < 1.0 {
        (2.0 * p).powf((4.0 * p - 2.0) / (pm1 * pm1))
            * 2.0f64.powf(((1.0 + a) * pm1 + pn0) / (pm1 * pm1))
            * (m2 * pm1).powf(-1.0 / pm1)
    } else {
        2.0f64.powf((2.0 * p - 1.0) / (pm1 * pm1))
            * p.powf(p / (pm1 * pm1))
            * (4.0 / (m2 * pm1)).powf(1.0 / pm1)
    };
    let t_bound = if a < 1.0 {
        (m / m1).powf(pm1 / (1.0 - a))
    } else {
        (m / m1).powf(pm1).exp()
    };
    Ok(BoundReport {
        lemma: Lemma::LiZhou,
        inputs: LemmaInputs::LiZhou { m1, m2, p, a },
        constant: m,
        t_bound,
        t_observed: None,
        margin: None,
        richardson_rel: None,
        side_condition_2e: None,
    })
}

/// Closed-form exp-max bound of the log-refined slicing lemma. Constraint
/// violations name the violated inequality.
pub fn lemma3_bound(inp: &Lemma3Inputs) -> Result<BoundReport> {
    let Lemma3Inputs {
        big_a,
        big_b,
        r,
        a,
        b,
        c,
        x,
        y,
        z,
        p,
    } = *inp;
    if !(p > 1.0) {
        return Err(Error::ConstraintViolation("p > 1".to_string()));
    }
    if !(a <= 1.0) {
        return Err(Error::ConstraintViolation("a <= 1".to_string()));
    }
    if !(b >= (x / (p - 1.0)).max(0.0)) {
        return Err(Error::ConstraintViolation("b >= max{0, x/(p-1)}".to_string()));
    }
    if (y + p * a + 1.0).abs() > 1e-12 {
        return Err(Error::ConstraintViolation("y + pa = -1".to_string()));
    }
    if !(z + c * p > -1.0) {
        return Err(Error::ConstraintViolation("z + cp > -1".to_string()));
    }
    if !(z + c * p >= c - 1.0) {
        return Err(Error::ConstraintViolation("z + cp >= c - 1".to_string()));
    }
    if !(big_a > 0.0 && big_b > 0.0) {
        return Err(Error::ConstraintViolation("A > 0, B > 0".to_string()));
    }
    if !(r > 1.0) {
        return Err(Error::ConstraintViolation("R > 1".to_string()));
    }
    let pm1 = p - 1.0;
    let mut r_inf = r;
    let mut k = 1;
    loop {
        let term = 0.5f64.powi(k);
        if term < 1e-17 {
            break;
        }
        r_inf *= 1.0 + term;
        k += 1;
    }
    let d = 2.0f64.powf(c + (p + (z + 1.0) * pm1) / (pm1 * pm1))
        * p.powf(p / (pm1 * pm1))
        * ((1.0 / big_b) * (c + (z + 1.0) / pm1).max(c + (z + 1.0) / p)).powf(1.0 / pm1);
    let denom = x + z + 1.0 + (c - b) * pm1;
    let t_bound = (2.0 * r_inf.ln()).max((d / big_a).powf(pm1 / denom)).exp();
    Ok(BoundReport {
        lemma: Lemma::LogSlicing,
        inputs: LemmaInputs::LogSlicing(inp.clone()),
        constant: d,
        t_bound,
        t_observed: None,
        margin: None,
        richardson_rel: None,
        side_condition_2e: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OdeKind {
    /// `H'' = c2 t^(1-2p-a/p) |H|^p`, started on the polynomial profile.
    Power,
    /// `G'' + 2G' = c2 |G|^p (1+t)^(-a)`, started at the constant floor.
    LiZhou,
}

#[derive(Debug, Clone, Copy)]
pub struct OdeParams {
    /// `D1` resp. `M1`.
    pub c1: f64,
    /// `D2` resp. `M2`.
    pub c2: f64,
    pub p: f64,
    pub a: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct OdeOutcome {
    /// Escape time from the finer of the two step sizes.
    pub t_observed: f64,
    pub t_coarse: f64,
    /// Relative disagreement between the two step sizes.
    pub richardson_rel: f64,
}

const ESCAPE: f64 = 1e12;
const MAX_STEPS: usize = 200_000_000;

/// Stable `phi` functions for the exponential integrator,
/// `phi1 = (e^z - 1)/z`, `phi2 = (e^z - 1 - z)/z^2`,
/// `phi3 = (e^z - 1 - z - z^2/2)/z^3`.
fn phi123(z: f64) -> (f64, f64, f64) {
    if z.abs() < 1e-3 {
        let p1 = 1.0 + z / 2.0 + z * z / 6.0 + z * z * z / 24.0 + z * z * z * z / 120.0;
        let p2 = 0.5 + z / 6.0 + z * z / 24.0 + z * z * z / 120.0 + z * z * z * z / 720.0;
        let p3 = 1.0 / 6.0 + z / 24.0 + z * z / 120.0 + z * z * z / 720.0 + z * z * z * z / 5040.0;
        (p1, p2, p3)
    } else {
        let ez = z.exp();
        let p1 = (ez - 1.0) / z;
        let p2 = (ez - 1.0 - z) / (z * z);
        let p3 = (ez - 1.0 - z - 0.5 * z * z) / (z * z * z);
        (p1, p2, p3)
    }
}

fn log_interp_crossing(t0: f64, t1: f64, y0: f64, y1: f64) -> f64 {
    if y1 <= y0 || !y0.is_finite() || y0 <= 0.0 {
        return t1;
    }
    let frac = (ESCAPE.ln() - y0.ln()) / (y1.ln() - y0.ln());
    t0 + (t1 - t0) * frac.clamp(0.0, 1.0)
}

fn integrate_power(params: &OdeParams, e0: f64, step0: f64, t_cap: f64) -> Result<f64> {
    let OdeParams { c1, c2, p, a } = *params;
    let expo = 1.0 - 2.0 * p - a / p;
    let rhs = |t: f64, h: f64| c2 * t.powf(expo) * h.abs().powf(p);
    let mut t = e0;
    let mut h_val = c1 * e0.powf(2.0 - a / p);
    let mut slope = c1 * (2.0 - a / p) * e0.powf(1.0 - a / p);
    for _ in 0..MAX_STEPS {
        if h_val >= ESCAPE {
            return Ok(t);
        }
        if t > t_cap {
            return Err(Error::NoBlowUp { t_cap });
        }
        let f0 = rhs(t, h_val);
        let rate = (1.0 / t).max(slope.abs() / h_val).max((f0 / h_val).max(0.0).sqrt());
        let dt = step0 / rate;

        let k1 = (slope, f0);
        let k2 = (slope + 0.5 * dt * k1.1, rhs(t + 0.5 * dt, h_val + 0.5 * dt * k1.0));
        let k3 = (slope + 0.5 * dt * k2.1, rhs(t + 0.5 * dt, h_val + 0.5 * dt * k2.0));
        let k4 = (slope + dt * k3.1, rhs(t + dt, h_val + dt * k3.0));
        let h_next = h_val + dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        let slope_next = slope + dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        if !h_next.is_finite() {
            return Ok(t + dt);
        }
        if h_next >= ESCAPE {
            return Ok(log_interp_crossing(t, t + dt, h_val, h_next));
        }
        t += dt;
        h_val = h_next;
        slope = slope_next;
    }
    Err(Error::NoBlowUp { t_cap })
}

fn integrate_lizhou(params: &OdeParams, e0: f64, step0: f64, t_cap: f64) -> Result<f64> {
    let OdeParams { c1, c2, p, a } = *params;
    let rhs = |t: f64, g: f64| c2 * g.abs().powf(p) * (1.0 + t).powf(-a);
    let mut t = e0;
    let mut g = c1;
    let mut v = 0.0f64;
    for _ in 0..MAX_STEPS {
        if g >= ESCAPE {
            return Ok(t);
        }
        if t > t_cap {
            return Err(Error::NoBlowUp { t_cap });
        }
        let rate = (1.0 / (1.0 + t)).max(v.abs() / g.max(1e-300));
        let dt = step0 / rate;
        let z = -2.0 * dt;
        let (p1, p2, p3) = phi123(z);
        let f0 = rhs(t, g);
        let g_pred = g + dt * p1 * v + dt * dt * p2 * f0;
        let f1 = rhs(t + dt, g_pred);
        let g_next = g + dt * p1 * v + dt * dt * ((p2 - p3) * f0 + p3 * f1);
        let v_next = z.exp() * v + dt * ((p1 - p2) * f0 + p2 * f1);
        if !g_next.is_finite() {
            return Ok(t + dt);
        }
        if g_next >= ESCAPE {
            return Ok(log_interp_crossing(t, t + dt, g, g_next));
        }
        t += dt;
        g = g_next;
        v = v_next;
    }
    Err(Error::NoBlowUp { t_cap })
}

/// Integrates the equality ODE for one lemma with growth-adaptive steps,
/// at `step0` and `step0/2`, reporting the escape time of `|solution|`
/// past 1e12 and the step-refinement agreement.
pub fn ode_blowup(kind: OdeKind, params: &OdeParams, e0: f64, step0: f64) -> Result<OdeOutcome> {
    if !(params.p > 1.0) || !(params.c1 > 0.0) || params.c2 < 0.0 {
        return Err(Error::InvalidParameter(
            "need p > 1, c1 > 0, c2 >= 0".to_string(),
        ));
    }
    if !(step0 > 0.0) {
        return Err(Error::InvalidParameter("step0 must be > 0".to_string()));
    }
    match kind {
        OdeKind::Power => {
            if !(params.a < 1.0) {
                return Err(Error::InvalidParameter("power ODE needs a < 1".to_string()));
            }
            if !(e0 > 0.0) {
                return Err(Error::InvalidParameter("power ODE needs E > 0".to_string()));
            }
        }
        OdeKind::LiZhou => {
            if !(params.a <= 1.0) {
                return Err(Error::InvalidParameter("Li-Zhou ODE needs a <= 1".to_string()));
            }
            if e0 < 0.0 {
                return Err(Error::InvalidParameter("Li-Zhou ODE needs E >= 0".to_string()));
            }
        }
    }
    let t_bound = if params.c2 == 0.0 {
        f64::INFINITY
    } else {
        match kind {
            OdeKind::Power => lemma1_bound(params.c1, params.c2, params.p, params.a)?.t_bound,
            OdeKind::LiZhou => lizhou_bound(params.c1, params.c2, params.p, params.a)?.t_bound,
        }
    };
    let t_cap = if params.c2 == 0.0 {
        1e7
    } else if t_bound.is_finite() {
        10.0 * t_bound
    } else {
        1e60
    };
    let run = |s: f64| match kind {
        OdeKind::Power => integrate_power(params, e0, s, t_cap),
        OdeKind::LiZhou => integrate_lizhou(params, e0, s, t_cap),
    };
    let coarse = run(step0)?;
    let fine = run(step0 / 2.0)?;
    Ok(OdeOutcome {
        t_observed: fine,
        t_coarse: coarse,
        richardson_rel: (coarse - fine).abs() / fine.abs().max(1e-300),
    })
}

/// Earliest start time from which the polynomial profile is
/// self-sustaining under the equality dynamics, i.e. the source at the
/// profile already dominates the profile's own curvature.
pub fn lem1_selfsustain_start(d1: f64, d2: f64, p: f64, a: f64) -> f64 {
    let num = (2.0 - a / p) * (1.0 - a / p);
    (num / (d2 * d1.powf(p - 1.0))).powf(1.0 / (1.0 - a))
}

/// Runs the dominance sweep over a parameter grid: for each tuple the
/// closed-form bound, the equality-ODE escape time and the margin.
/// A missing `t_observed` means the ODE hit its cap without escaping.
pub fn dominance_sweep(
    p_values: &[f64],
    a_values: &[f64],
    c_values: &[f64],
    step0: f64,
) -> Result<Vec<BoundReport>> {
    let mut tasks = Vec::new();
    for &p in p_values {
        for &a in a_values {
            for &c1 in c_values {
                for &c2 in c_values {
                    tasks.push((p, a, c1, c2));
                }
            }
        }
    }
    let reports: Result<Vec<Vec<BoundReport>>> = tasks
        .par_iter()
        .map(|&(p, a, c1, c2)| {
            let params = OdeParams { c1, c2, p, a };
            let mut out = Vec::with_capacity(2);

            let mut power = lemma1_bound(c1, c2, p, a)?;
            let e_power = lem1_selfsustain_start(c1, c2, p, a).max(1.0);
            power.side_condition_2e = Some(power.t_bound > 2.0 * e_power);
            match ode_blowup(OdeKind::Power, &params, e_power, step0) {
                Ok(outcome) => {
                    power.t_observed = Some(outcome.t_observed);
                    power.margin = Some(power.t_bound / outcome.t_observed);
                    power.richardson_rel = Some(outcome.richardson_rel);
                }
                Err(Error::NoBlowUp { .. }) => {}
                Err(e) => return Err(e),
            }
            out.push(power);

            let mut lz = lizhou_bound(c1, c2, p, a)?;
            lz.side_condition_2e = Some(lz.t_bound > 2.0);
            match ode_blowup(OdeKind::LiZhou, &params, 1.0, step0) {
                Ok(outcome) => {
                    lz.t_observed = Some(outcome.t_observed);
                    lz.margin = Some(lz.t_bound / outcome.t_observed);
                    lz.richardson_rel = Some(outcome.richardson_rel);
                }
                Err(Error::NoBlowUp { .. }) => {}
                Err(e) => return Err(e),
            }
            out.push(lz);
            Ok(out)
        })
        .collect();
    Ok(reports?.into_iter().flatten().collect())
}

/// Sweep export with header
/// `lemma,p,a,param1,param2,t_bound,t_observed,margin`.
pub fn write_sweep_csv<W: Write>(reports: &[BoundReport], out: &mut W) -> Result<()> {
    writeln!(out, "lemma,p,a,param1,param2,t_bound,t_observed,margin")?;
    for rep in reports {
        let (p, a, c1, c2) = rep.inputs.params();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            rep.lemma.name(),
            p,
            a,
            c1,
            c2,
            rep.t_bound,
            rep.t_observed.unwrap_or(f64::NAN),
            rep.margin.unwrap_or(f64::NAN)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequence_initial_values() {
        let t = seq_eval(SeqKind::Lem1Abc, 2.0, 0.0, 5).unwrap();
        assert!((t.rows[0].recurrence[0] - 2.5).abs() < 1e-15, "a_1 = (1-a)/p + 2");
        assert_eq!(t.rows[0].recurrence[1], 0.0);

        let q = seq_eval(SeqKind::LizhouQl, 1.7, 0.0, 5).unwrap();
        assert_eq!(q.rows[0].n, 0);
        assert_eq!(q.rows[0].recurrence[0], 0.0);
        assert_eq!(q.rows[0].closed[0], 0.0);
    }

    #[test]
    fn recurrences_match_closed_forms() {
        for &p in &[1.5, 2.0, 3.0] {
            for &a in &[-1.0, 0.0, 0.5] {
                for kind in [SeqKind::Lem1Abc, SeqKind::LizhouMk, SeqKind::LizhouHjt, SeqKind::LizhouQl] {
                    let t = seq_eval(kind, p, a, 30).unwrap();
                    for row in &t.rows {
                        for (r, c) in row.recurrence.iter().zip(&row.closed) {
                            let scale = c.abs().max(1.0);
                            assert!(
                                (r - c).abs() <= 1e-12 * scale,
                                "{kind:?} p={p} a={a} n={}: {r} vs {c}",
                                row.n
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn products_limits_and_ratio_bound() {
        let t = seq_eval(SeqKind::Products, 2.0, 0.0, 60).unwrap();
        assert!((t.k_inf - 2.0).abs() <= 1e-14);
        // l_n increasing with finite limit.
        let ls: Vec<f64> = t.rows.iter().map(|r| r.recurrence[0]).collect();
        assert!(ls.windows(2).all(|w| w[1] >= w[0]));
        assert!(t.l_inf >= *ls.last().unwrap());
        assert!(t.l_inf.is_finite());
        // k_n increasing to 2.
        let ks: Vec<f64> = t.rows.iter().map(|r| r.recurrence[1]).collect();
        assert!(ks.windows(2).all(|w| w[1] >= w[0]));
        assert!(ks.iter().all(|&k| k <= 2.0));
        // b_n >= (1/2)^(p^n0) for all n <= 60.
        for &p in &[1.5, 2.0, 3.0] {
            let t = seq_eval(SeqKind::Products, p, 0.0, 60).unwrap();
            let floor = 0.5f64.powf(p.powi(t.n0 as i32));
            for row in &t.rows {
                assert!(
                    row.recurrence[2] >= floor,
                    "p = {p}, n = {}: b_n = {} < {floor}",
                    row.n,
                    row.recurrence[2]
                );
            }
        }
    }

    #[test]
    fn lemma1_constant_frozen_value() {
        // p = 2, a = 0, D2 = 1: D = 2^4 * 2^5 * 5^2 = 12800.
        let rep = lemma1_bound(1.0, 1.0, 2.0, 0.0).unwrap();
        assert!((rep.constant - 12800.0).abs() < 1e-9);
        assert!((rep.t_bound - 12800.0).abs() < 1e-9);

        // D monotone decreasing in D2.
        let lo = lemma1_bound(1.0, 2.0, 2.0, 0.0).unwrap().constant;
        assert!(lo < rep.constant);

        // t_bound scales as D1^{-(p-1)/(1-a)}.
        let half = lemma1_bound(0.5, 1.0, 2.0, 0.0).unwrap().t_bound;
        assert!((half / rep.t_bound - 2.0).abs() < 1e-12);

        assert!(lemma1_bound(1.0, 1.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn lizhou_constant_cases() {
        // a = 1, p = 2, M2 = 4: M = 2^3 * 2^2 * (4/4)^1 = 32.
        let rep = lizhou_bound(1.0, 4.0, 2.0, 1.0).unwrap();
        assert!((rep.constant - 32.0).abs() < 1e-12);
        assert!((rep.t_bound - 32f64.exp()).abs() < 1e-6 * 32f64.exp());

        // Branch boundary: a = 0 and a = -0 give identical constants.
        let z = lizhou_bound(1.0, 1.0, 2.0, 0.0).unwrap().constant;
        let nz = lizhou_bound(1.0, 1.0, 2.0, -0.0).unwrap().constant;
        assert_eq!(z, nz);

        // t_bound diverges as M1 -> 0+.
        let t1 = lizhou_bound(1.0, 1.0, 2.0, 0.0).unwrap().t_bound;
        let t2 = lizhou_bound(0.25, 1.0, 2.0, 0.0).unwrap().t_bound;
        assert!(t2 > t1);

        assert!(lizhou_bound(1.0, 1.0, 2.0, 1.5).is_err());
    }

    #[test]
    fn lemma3_critical_instantiation_and_constraints() {
        let inp = Lemma3Inputs {
            big_a: 1.0,
            big_b: 1.0,
            r: 2.0,
            a: 1.0,
            b: 0.0,
            c: 1.0,
            x: -1.0,
            y: -3.0,
            z: 0.0,
            p: 2.0,
        };
        let rep = lemma3_bound(&inp).unwrap();
        // D = 2^4 * 4 * 2 = 128 and the exponent denominator is 1, so the
        // bound is exp(max(2 log R_inf, 128)) = e^128.
        assert!((rep.constant - 128.0).abs() < 1e-9);
        assert!((rep.t_bound.ln() - 128.0).abs() < 1e-9);

        // R_inf / R: frozen partial product.
        let mut prod = 1.0;
        for k in 1..60 {
            prod *= 1.0 + 0.5f64.powi(k);
        }
        assert!((prod - 2.3842310290313717).abs() < 1e-13, "got {prod}");

        let mut bad = inp.clone();
        bad.y = -2.5;
        match lemma3_bound(&bad) {
            Err(Error::ConstraintViolation(name)) => assert!(name.contains("y + pa")),
            other => panic!("expected constraint violation, got {other:?}"),
        }
    }

    #[test]
    fn ode_error_path_without_source() {
        let params = OdeParams { c1: 1.0, c2: 0.0, p: 2.0, a: 0.0 };
        match ode_blowup(OdeKind::LiZhou, &params, 0.0, 0.01) {
            Err(Error::NoBlowUp { .. }) => {}
            other => panic!("expected NoBlowUp, got {other:?}"),
        }
    }

    #[test]
    fn lizhou_ode_reference_case_is_step_stable() {
        let params = OdeParams { c1: 1.0, c2: 1.0, p: 2.0, a: 0.0 };
        let outcome = ode_blowup(OdeKind::LiZhou, &params, 0.0, 0.01).unwrap();
        assert!(outcome.t_observed.is_finite() && outcome.t_observed > 0.0);
        assert!(
            outcome.richardson_rel < 0.01,
            "step disagreement {}",
            outcome.richardson_rel
        );
    }

    #[test]
    fn lizhou_escape_times_scale_with_floor() {
        // Log-log slope of t_obs against M1 should be near -(p-1)/(1-a).
        // M2 = 0.1 keeps the floor-driven phase dominant over the O(1)
        // escape tail across the whole M1 range.
        let p = 2.0;
        let a = 0.0;
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for k in 0..=6 {
            let m1 = 0.5f64.powi(k);
            let params = OdeParams { c1: m1, c2: 0.1, p, a };
            let outcome = ode_blowup(OdeKind::LiZhou, &params, 0.0, 0.005).unwrap();
            xs.push(m1.ln());
            ys.push(outcome.t_observed.ln());
        }
        let (slope, _, _, _) = crate::quad::least_squares(&xs, &ys);
        let predicted = -(p - 1.0) / (1.0 - a);
        assert!(
            (slope - predicted).abs() <= 0.1 * predicted.abs(),
            "slope {slope} vs {predicted}"
        );
    }

    #[test]
    fn power_ode_dominated_by_bound_at_reference_point() {
        let params = OdeParams { c1: 1.0, c2: 1.0, p: 2.0, a: 0.0 };
        let e0 = lem1_selfsustain_start(1.0, 1.0, 2.0, 0.0).max(1.0);
        let outcome = ode_blowup(OdeKind::Power, &params, e0, 0.01).unwrap();
        let bound = lemma1_bound(1.0, 1.0, 2.0, 0.0).unwrap().t_bound;
        assert!(outcome.t_observed <= bound, "{} > {bound}", outcome.t_observed);
        assert!(outcome.richardson_rel < 0.01);
    }

    #[test]
    fn sweep_csv_layout() {
        let reports = dominance_sweep(&[2.0], &[0.0], &[1.0], 0.02).unwrap();
        assert_eq!(reports.len(), 2);
        let mut buf = Vec::new();
        write_sweep_csv(&reports, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("lemma,p,a,param1,param2,t_bound,t_observed,margin\n"));
        assert_eq!(text.lines().count(), 3);
    }
}
