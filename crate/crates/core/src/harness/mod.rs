//! Experiment orchestration: amplitude scans, lifespan-exponent fits and
//! result emission. Scan rows run concurrently; `LIFESPAN_LAB_WORKERS`
//! overrides the worker count.

pub mod config;
pub mod emit;

use crate::error::{Error, Result};
use crate::model::ProblemSpec;
use crate::quad::least_squares;
use crate::solver::{estimate_lifespan, LifespanSettings};
use rayon::prelude::*;

/// One scan row: amplitude, finest grid and the lifespan bracket.
#[derive(Debug, Clone)]
pub struct ScanRow {
    pub eps: f64,
    pub delta_finest: f64,
    pub t_star: f64,
    pub t_lo: f64,
    pub t_hi: f64,
    pub survived: bool,
}

/// Scan results, keyed by a fingerprint of the problem and solver
/// settings so rows from different configurations never merge.
#[derive(Debug, Clone)]
pub struct ScanTable {
    pub spec: ProblemSpec,
    pub fingerprint: u64,
    pub rows: Vec<ScanRow>,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100_0000_01b3);
    }
    h
}

/// Stable hash of the problem (minus amplitude, which varies per row)
/// and the solver settings.
pub fn fingerprint(spec: &ProblemSpec, settings: &LifespanSettings) -> u64 {
    let canonical = format!(
        "{};delta0={:?};t_max={:?};thresholds={:?}",
        spec.with_eps(1.0).canonical_string(),
        settings.delta0,
        settings.t_max,
        settings.thresholds
    );
    fnv1a(canonical.as_bytes())
}

/// Worker-count override from `LIFESPAN_LAB_WORKERS`.
pub fn worker_count() -> Option<usize> {
    std::env::var("LIFESPAN_LAB_WORKERS")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&n| n > 0)
}

impl ScanTable {
    fn validate(&self) -> Result<()> {
        for pair in self.rows.windows(2) {
            if !(pair[1].eps < pair[0].eps) {
                return Err(Error::InvalidParameter(
                    "scan rows must have strictly decreasing eps".to_string(),
                ));
            }
        }
        for row in &self.rows {
            if !row.survived && !(row.t_lo <= row.t_star && row.t_star <= row.t_hi) {
                return Err(Error::InvalidParameter(format!(
                    "bracket violation at eps = {}",
                    row.eps
                )));
            }
        }
        Ok(())
    }

    /// Merges rows from another table produced under identical settings.
    pub fn merge(&mut self, other: ScanTable) -> Result<()> {
        if other.fingerprint != self.fingerprint {
            return Err(Error::FingerprintMismatch);
        }
        self.rows.extend(other.rows);
        self.rows.sort_by(|a, b| b.eps.partial_cmp(&a.eps).unwrap());
        self.validate()
    }

    pub fn blown_rows(&self) -> Vec<&ScanRow> {
        self.rows
            .iter()
            .filter(|r| !r.survived && r.t_star.is_finite())
            .collect()
    }
}

/// Runs `estimate_lifespan` for every amplitude in `eps_grid`
/// (a geometric grid with ratio in [1.2, 2], at least 5 points).
/// Rows execute concurrently; results are sorted by decreasing eps.
pub fn lifespan_scan(
    spec: &ProblemSpec,
    eps_grid: &[f64],
    settings: &LifespanSettings,
) -> Result<ScanTable> {
    if eps_grid.len() < 5 {
        return Err(Error::InvalidParameter(format!(
            "eps grid needs at least 5 points, got {}",
            eps_grid.len()
        )));
    }
    let mut eps = eps_grid.to_vec();
    eps.sort_by(|a, b| b.partial_cmp(a).unwrap());
    for pair in eps.windows(2) {
        let ratio = pair[0] / pair[1];
        if !(1.2 - 1e-9..=2.0 + 1e-9).contains(&ratio) {
            return Err(Error::InvalidParameter(format!(
                "eps grid must be geometric with ratio in [1.2, 2]; got {ratio}"
            )));
        }
    }

    let run_rows = || -> Result<Vec<ScanRow>> {
        eps.par_iter()
            .map(|&e| {
                let est = estimate_lifespan(&spec.with_eps(e), settings).map_err(|err| {
                    Error::ScanFailure {
                        eps: e,
                        source: Box::new(err),
                    }
                })?;
                Ok(ScanRow {
                    eps: e,
                    delta_finest: est.delta_finest,
                    t_star: est.t_star,
                    t_lo: est.t_lo,
                    t_hi: est.t_hi,
                    survived: est.survived(),
                })
            })
            .collect()
    };
    let rows = match worker_count() {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?
            .install(run_rows),
        None => run_rows(),
    }?;

    let table = ScanTable {
        spec: spec.clone(),
        fingerprint: fingerprint(spec, settings),
        rows,
    };
    table.validate()?;
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Power-law lifespan (`a < 1`): fit `log t*` on `log eps`.
    Power,
    /// Exponential lifespan (`a = 1`): fit `log t*` on `eps^-(p-1)`.
    Exp,
    /// Global existence (`a > 1`): every row must survive.
    Global,
}

impl Regime {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "power" => Ok(Regime::Power),
            "exp" => Ok(Regime::Exp),
            "global" => Ok(Regime::Global),
            other => Err(Error::Config(format!("unknown regime `{other}`"))),
        }
    }
}

/// Result of fitting the lifespan scaling law to a scan.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub regime: Regime,
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub pearson_r: f64,
    pub predicted_slope: f64,
    pub slope_tol: f64,
    pub pass: bool,
}

/// Fits the scaling law for the requested regime. `slope_tol` is the
/// acceptance half-width for the power regime; the exponential regime
/// passes on Pearson r >= 0.98 with positive trend.
pub fn fit_exponent(table: &ScanTable, regime: Regime, slope_tol: f64) -> Result<FitReport> {
    match regime {
        Regime::Power | Regime::Exp => {
            let rows = table.blown_rows();
            if rows.len() < 5 {
                return Err(Error::InsufficientRows {
                    needed: 5,
                    got: rows.len(),
                });
            }
            let p = table.spec.p;
            let a = table.spec.a;
            let (xs, predicted): (Vec<f64>, f64) = match regime {
                Regime::Power => (
                    rows.iter().map(|r| r.eps.ln()).collect(),
                    -(p - 1.0) / (1.0 - a),
                ),
                _ => (
                    rows.iter().map(|r| r.eps.powf(-(p - 1.0))).collect(),
                    f64::NAN,
                ),
            };
            let ys: Vec<f64> = rows.iter().map(|r| r.t_star.ln()).collect();
            let (slope, intercept, stderr, pearson_r) = least_squares(&xs, &ys);
            let pass = match regime {
                Regime::Power => (slope - predicted).abs() <= slope_tol,
                _ => pearson_r >= 0.98 && slope > 0.0,
            };
            Ok(FitReport {
                regime,
                slope,
                intercept,
                stderr,
                pearson_r,
                predicted_slope: predicted,
                slope_tol,
                pass,
            })
        }
        Regime::Global => {
            if table.rows.is_empty() {
                return Err(Error::InsufficientRows { needed: 1, got: 0 });
            }
            let pass = table.rows.iter().all(|r| r.survived);
            Ok(FitReport {
                regime,
                slope: f64::NAN,
                intercept: f64::NAN,
                stderr: f64::NAN,
                pearson_r: f64::NAN,
                predicted_slope: f64::NAN,
                slope_tol,
                pass,
            })
        }
    }
}

/// Builds the geometric amplitude grid `eps_max * ratio^-k`.
pub fn geometric_grid(eps_max: f64, ratio: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| eps_max * ratio.powi(-(k as i32))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Preset;

    fn table_with_rows(rows: Vec<ScanRow>) -> ScanTable {
        let spec = ProblemSpec::new(2.0, 0.0, 0.1, 1.0, Preset::BumpBoth).unwrap();
        let settings = LifespanSettings::default();
        ScanTable {
            fingerprint: fingerprint(&spec, &settings),
            spec,
            rows,
        }
    }

    fn synthetic_rows(n: usize) -> Vec<ScanRow> {
        // Exact power law t* = eps^-1.
        (0..n)
            .map(|k| {
                let eps = 0.2 * 0.5f64.powf(k as f64 / 2.0);
                ScanRow {
                    eps,
                    delta_finest: 1e-3,
                    t_star: 1.0 / eps,
                    t_lo: 0.9 / eps,
                    t_hi: 1.1 / eps,
                    survived: false,
                }
            })
            .collect()
    }

    #[test]
    fn exact_power_law_fit() {
        let table = table_with_rows(synthetic_rows(9));
        let fit = fit_exponent(&table, Regime::Power, 0.15).unwrap();
        assert!((fit.slope + 1.0).abs() < 1e-12);
        assert!(fit.stderr < 1e-10);
        assert!(fit.pass);
    }

    #[test]
    fn fit_needs_enough_rows() {
        let table = table_with_rows(synthetic_rows(4));
        assert!(matches!(
            fit_exponent(&table, Regime::Power, 0.15),
            Err(Error::InsufficientRows { .. })
        ));
    }

    #[test]
    fn global_regime_requires_all_survived() {
        let mut rows = synthetic_rows(5);
        let fit = fit_exponent(&table_with_rows(rows.clone()), Regime::Global, 0.0).unwrap();
        assert!(!fit.pass);
        for r in &mut rows {
            r.survived = true;
            r.t_star = f64::INFINITY;
        }
        let fit = fit_exponent(&table_with_rows(rows), Regime::Global, 0.0).unwrap();
        assert!(fit.pass);
    }

    #[test]
    fn merge_rejects_foreign_fingerprint() {
        let mut a = table_with_rows(synthetic_rows(5));
        let mut b = table_with_rows(synthetic_rows(5));
        b.fingerprint ^= 1;
        assert!(matches!(a.merge(b), Err(Error::FingerprintMismatch)));
    }

    #[test]
    fn fingerprint_ignores_amplitude_but_not_settings() {
        let spec = ProblemSpec::new(2.0, 0.0, 0.1, 1.0, Preset::BumpBoth).unwrap();
        let s1 = LifespanSettings::default();
        let f1 = fingerprint(&spec, &s1);
        assert_eq!(f1, fingerprint(&spec.with_eps(0.05), &s1));
        let mut s2 = s1.clone();
        s2.delta0 /= 2.0;
        assert_ne!(f1, fingerprint(&spec, &s2));
    }

    #[test]
    fn scan_grid_validation() {
        let spec = ProblemSpec::new(2.0, 0.0, 0.1, 1.0, Preset::BumpBoth).unwrap();
        let settings = LifespanSettings::default();
        assert!(lifespan_scan(&spec, &[0.1, 0.05], &settings).is_err());
        let bad_ratio = [0.2, 0.19, 0.18, 0.17, 0.16];
        assert!(lifespan_scan(&spec, &bad_ratio, &settings).is_err());
    }

    #[test]
    fn zero_data_scan_survives_everywhere() {
        let spec = ProblemSpec::new(2.0, 0.0, 0.1, 1.0, Preset::Zero).unwrap();
        let settings = LifespanSettings {
            delta0: 1.0 / 20.0,
            t_max: 5.0,
            thresholds: vec![10.0, 40.0, 160.0],
        };
        let grid = geometric_grid(0.2, std::f64::consts::SQRT_2, 5);
        let table = lifespan_scan(&spec, &grid, &settings).unwrap();
        assert!(table.rows.iter().all(|r| r.survived));
        let fit = fit_exponent(&table, Regime::Global, 0.0).unwrap();
        assert!(fit.pass);
    }
}
