//! Small quadrature and sampling helpers shared across modules.

/// Composite trapezoid rule for `f` on `[a, b]` with `n` panels.
pub fn trapezoid<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    assert!(n >= 1, "trapezoid needs at least one panel");
    if a == b {
        return 0.0;
    }
    let h = (b - a) / n as f64;
    let mut acc = 0.5 * (f(a) + f(b));
    for k in 1..n {
        acc += f(a + k as f64 * h);
    }
    acc * h
}

/// Trapezoid rule over uniformly spaced samples with spacing `h`.
pub fn trapezoid_samples(values: &[f64], h: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let inner: f64 = values[1..values.len() - 1].iter().sum();
    h * (0.5 * (values[0] + values[values.len() - 1]) + inner)
}

/// Integrates a sampled function over `[lo, hi]` where samples sit at
/// `x_k = x0 + k*h`. End contributions use linear interpolation, so the
/// result is second order for C^2 integrands even when `lo`, `hi` fall
/// between nodes.
pub fn integrate_interval(x0: f64, h: f64, values: &[f64], lo: f64, hi: f64) -> f64 {
    if hi <= lo || values.len() < 2 {
        return 0.0;
    }
    let n = values.len();
    let x_last = x0 + (n - 1) as f64 * h;
    let lo = lo.max(x0);
    let hi = hi.min(x_last);
    if hi <= lo {
        return 0.0;
    }
    let at = |x: f64| -> f64 {
        let s = (x - x0) / h;
        let i = (s.floor() as usize).min(n - 2);
        let frac = s - i as f64;
        values[i] * (1.0 - frac) + values[i + 1] * frac
    };
    let i_lo = ((lo - x0) / h).ceil() as usize;
    let i_hi = ((hi - x0) / h).floor() as usize;
    if i_lo > i_hi {
        // Both endpoints inside a single cell.
        return 0.5 * (at(lo) + at(hi)) * (hi - lo);
    }
    let x_lo = x0 + i_lo as f64 * h;
    let x_hi = x0 + i_hi as f64 * h;
    let mut acc = 0.0;
    if lo < x_lo {
        acc += 0.5 * (at(lo) + values[i_lo]) * (x_lo - lo);
    }
    acc += trapezoid_samples(&values[i_lo..=i_hi], h);
    if hi > x_hi {
        acc += 0.5 * (values[i_hi] + at(hi)) * (hi - x_hi);
    }
    acc
}

/// Uniform sample grid `a, a+h, ..., b` (inclusive) with `n` panels.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    let h = (b - a) / n as f64;
    (0..=n).map(|k| a + k as f64 * h).collect()
}

/// Centered first differences; endpoints copy the adjacent interior value.
pub fn centered_first(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    let mut d = vec![0.0; n];
    if n < 3 {
        return d;
    }
    for i in 1..n - 1 {
        d[i] = (values[i + 1] - values[i - 1]) / (2.0 * h);
    }
    d[0] = d[1];
    d[n - 1] = d[n - 2];
    d
}

/// Centered second differences; endpoints copy the adjacent interior value.
pub fn centered_second(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    let mut d = vec![0.0; n];
    if n < 3 {
        return d;
    }
    for i in 1..n - 1 {
        d[i] = (values[i + 1] - 2.0 * values[i] + values[i - 1]) / (h * h);
    }
    d[0] = d[1];
    d[n - 1] = d[n - 2];
    d
}

/// Deterministic splitmix64 stream, used for randomized verification points.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform draw in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Uniform draw in `[lo, hi)`.
    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    pub fn index(&mut self, len: usize) -> usize {
        (self.next_u64() % len as u64) as usize
    }
}

/// Ordinary least squares of `y` on `x`. Returns (slope, intercept,
/// stderr of the slope, Pearson r).
pub fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64, f64, f64) {
    let n = x.len() as f64;
    assert!(x.len() == y.len() && x.len() >= 2);
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|&v| (v - mx) * (v - mx)).sum();
    let syy: f64 = y.iter().map(|&v| (v - my) * (v - my)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(&a, &b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(&a, &b)| {
            let r = b - (intercept + slope * a);
            r * r
        })
        .sum();
    let stderr = if x.len() > 2 {
        (ss_res / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    let r = sxy / (sxx * syy).sqrt();
    (slope, intercept, stderr, r)
}
