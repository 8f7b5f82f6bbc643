//! Numerical laboratory for the one-dimensional semilinear wave equation
//!
//! ```text
//! u_tt - u_xx = |u_x|^p / <x>^a,   u(x,0) = eps f(x),  u_t(x,0) = eps g(x),
//! ```
//!
//! with compactly supported data. The crate measures the lifespan of
//! small-amplitude solutions on a unit-CFL characteristic grid, fits the
//! lifespan scaling laws across the subcritical (`a < 1`), critical
//! (`a = 1`) and supercritical (`a > 1`) weight regimes, runs the Picard
//! existence iteration for the gradient field, monitors the proof
//! functionals on computed solutions and certifies the closed-form
//! blow-up bounds against equality-ODE integrations.

pub mod error;
pub mod functionals;
pub mod harness;
pub mod model;
pub mod odelab;
pub mod picard;
pub mod quad;
pub mod solver;

pub use error::{Error, Result};
pub use functionals::{constants, ConstantSet, FunctionalSeries};
pub use harness::{fit_exponent, lifespan_scan, FitReport, Regime, ScanTable};
pub use model::{bracket, free_solution, preset_data, InitialData, LightCone, Preset, ProblemSpec};
pub use odelab::{lemma1_bound, lemma3_bound, lizhou_bound, ode_blowup, seq_eval, BoundReport};
pub use picard::{apriori_check, apriori_factor, duhamel_line, picard_run, PicardReport};
pub use solver::{
    duhamel_area, estimate_lifespan, evolve, EvolveOptions, LifespanEstimate, LifespanSettings,
    SolutionRun,
};
