//! Flat key-value configuration with `[problem]`, `[solver]`, `[scan]`
//! and `[output]` sections. Unknown keys are hard errors so typos cannot
//! silently fall back to defaults.

use crate::error::{Error, Result};
use crate::model::{Preset, ProblemSpec};
use crate::solver::LifespanSettings;

#[derive(Debug, Clone)]
pub struct ProblemSection {
    pub p: f64,
    pub a: f64,
    pub eps: f64,
    pub r: f64,
    pub preset: String,
    pub amp_f: f64,
    pub amp_g: f64,
}

#[derive(Debug, Clone)]
pub struct SolverSection {
    pub delta: f64,
    pub t_max: f64,
    pub blow_threshold: f64,
    pub frame_stride: usize,
    pub nonlinearity: bool,
    pub r0: Option<f64>,
    pub picard_jmax: usize,
    pub picard_tol: f64,
    pub ode_step0: f64,
}

#[derive(Debug, Clone)]
pub struct ScanSection {
    pub eps_max: f64,
    pub eps_ratio: f64,
    pub eps_count: usize,
    pub delta0: f64,
    pub t_max: f64,
    pub thresholds: Vec<f64>,
    pub regime: String,
    pub slope_tol: f64,
}

#[derive(Debug, Clone)]
pub struct OutputSection {
    pub formats: Vec<String>,
    pub binary_dump: bool,
}

#[derive(Debug, Clone)]
pub struct Config {
    pub problem: ProblemSection,
    pub solver: SolverSection,
    pub scan: ScanSection,
    pub output: OutputSection,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            problem: ProblemSection {
                p: 2.0,
                a: 0.0,
                eps: 0.1,
                r: 1.0,
                preset: "bump_both".to_string(),
                amp_f: 1.0,
                amp_g: 1.0,
            },
            solver: SolverSection {
                delta: 1.0 / 400.0,
                t_max: 1.0,
                blow_threshold: 1e3,
                frame_stride: 8,
                nonlinearity: true,
                r0: None,
                picard_jmax: 10,
                picard_tol: 1e-10,
                ode_step0: 0.01,
            },
            scan: ScanSection {
                eps_max: 0.2,
                eps_ratio: std::f64::consts::SQRT_2,
                eps_count: 9,
                delta0: 1.0 / 400.0,
                t_max: 200.0,
                thresholds: vec![1e3, 4e3, 1.6e4],
                regime: "power".to_string(),
                slope_tol: 0.15,
            },
            output: OutputSection {
                formats: vec!["csv".to_string(), "svg".to_string()],
                binary_dump: false,
            },
        }
    }
}

fn parse_f64(line_no: usize, key: &str, value: &str) -> Result<f64> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("line {line_no}: `{key}` expects a number, got `{value}`")))
}

fn parse_usize(line_no: usize, key: &str, value: &str) -> Result<usize> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("line {line_no}: `{key}` expects an integer, got `{value}`")))
}

fn parse_bool(line_no: usize, key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!(
            "line {line_no}: `{key}` expects true/false, got `{value}`"
        ))),
    }
}

fn parse_list(line_no: usize, key: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|s| {
            s.trim().parse().map_err(|_| {
                Error::Config(format!("line {line_no}: `{key}` has a bad entry `{s}`"))
            })
        })
        .collect()
}

impl Config {
    pub fn parse(text: &str) -> Result<Config> {
        let mut cfg = Config::default();
        let mut section = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line.starts_with('[') && line.ends_with(']') {
                section = line[1..line.len() - 1].trim().to_string();
                match section.as_str() {
                    "problem" | "solver" | "scan" | "output" => continue,
                    other => {
                        return Err(Error::Config(format!(
                            "line {line_no}: unknown section `[{other}]`"
                        )))
                    }
                }
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "line {line_no}: expected `key = value`, got `{line}`"
                )));
            };
            let key = key.trim();
            let value = value.trim();
            match (section.as_str(), key) {
                ("problem", "p") => cfg.problem.p = parse_f64(line_no, key, value)?,
                ("problem", "a") => cfg.problem.a = parse_f64(line_no, key, value)?,
                ("problem", "eps") => cfg.problem.eps = parse_f64(line_no, key, value)?,
                ("problem", "r") => cfg.problem.r = parse_f64(line_no, key, value)?,
                ("problem", "preset") => cfg.problem.preset = value.to_string(),
                ("problem", "amp_f") => cfg.problem.amp_f = parse_f64(line_no, key, value)?,
                ("problem", "amp_g") => cfg.problem.amp_g = parse_f64(line_no, key, value)?,
                ("solver", "delta") => cfg.solver.delta = parse_f64(line_no, key, value)?,
                ("solver", "t_max") => cfg.solver.t_max = parse_f64(line_no, key, value)?,
                ("solver", "blow_threshold") => {
                    cfg.solver.blow_threshold = parse_f64(line_no, key, value)?
                }
                ("solver", "frame_stride") => {
                    cfg.solver.frame_stride = parse_usize(line_no, key, value)?
                }
                ("solver", "nonlinearity") => {
                    cfg.solver.nonlinearity = parse_bool(line_no, key, value)?
                }
                ("solver", "r0") => cfg.solver.r0 = Some(parse_f64(line_no, key, value)?),
                ("solver", "picard_jmax") => {
                    cfg.solver.picard_jmax = parse_usize(line_no, key, value)?
                }
                ("solver", "picard_tol") => cfg.solver.picard_tol = parse_f64(line_no, key, value)?,
                ("solver", "ode_step0") => cfg.solver.ode_step0 = parse_f64(line_no, key, value)?,
                ("scan", "eps_max") => cfg.scan.eps_max = parse_f64(line_no, key, value)?,
                ("scan", "eps_ratio") => cfg.scan.eps_ratio = parse_f64(line_no, key, value)?,
                ("scan", "eps_count") => cfg.scan.eps_count = parse_usize(line_no, key, value)?,
                ("scan", "delta0") => cfg.scan.delta0 = parse_f64(line_no, key, value)?,
                ("scan", "t_max") => cfg.scan.t_max = parse_f64(line_no, key, value)?,
                ("scan", "thresholds") => cfg.scan.thresholds = parse_list(line_no, key, value)?,
                ("scan", "regime") => cfg.scan.regime = value.to_string(),
                ("scan", "slope_tol") => cfg.scan.slope_tol = parse_f64(line_no, key, value)?,
                ("output", "formats") => {
                    cfg.output.formats = value.split(',').map(|s| s.trim().to_string()).collect()
                }
                ("output", "binary_dump") => {
                    cfg.output.binary_dump = parse_bool(line_no, key, value)?
                }
                ("", _) => {
                    return Err(Error::Config(format!(
                        "line {line_no}: key `{key}` outside any section"
                    )))
                }
                (sec, _) => {
                    return Err(Error::Config(format!(
                        "line {line_no}: unknown key `{key}` in [{sec}]"
                    )))
                }
            }
        }
        Ok(cfg)
    }

    pub fn problem_spec(&self) -> Result<ProblemSpec> {
        let preset = Preset::parse(&self.problem.preset)?;
        let mut spec = ProblemSpec::new(
            self.problem.p,
            self.problem.a,
            self.problem.eps,
            self.problem.r,
            preset,
        )?;
        spec.preset_params = (self.problem.amp_f, self.problem.amp_g);
        // Fail fast on rejected presets.
        spec.data()?;
        Ok(spec)
    }

    pub fn lifespan_settings(&self) -> LifespanSettings {
        LifespanSettings {
            delta0: self.scan.delta0,
            t_max: self.scan.t_max,
            thresholds: self.scan.thresholds.clone(),
        }
    }

    pub fn eps_grid(&self) -> Vec<f64> {
        super::geometric_grid(self.scan.eps_max, self.scan.eps_ratio, self.scan.eps_count)
    }
}
