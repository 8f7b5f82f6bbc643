// scratch calibration harness (removed before release)
use lifespan_lab::model::{Preset, ProblemSpec};
use lifespan_lab::odelab::{dominance_sweep, ode_blowup, OdeKind, OdeParams};
use lifespan_lab::solver::{estimate_lifespan, evolve, LifespanSettings, RunStatus};
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let what = args.get(1).map(|s| s.as_str()).unwrap_or("all");

    if what == "tstar" || what == "all" {
        println!("--- t*(eps) for p=2,a=0 bump_both at delta=1/400 (single grid crossing of 1.6e4) ---");
        for &eps in &[0.2, 0.1, 0.05, 0.025, 0.0125] {
            let spec = ProblemSpec::new(2.0, 0.0, eps, 1.0, Preset::BumpBoth).unwrap();
            let t0 = Instant::now();
            let run = evolve(&spec, 1.0 / 400.0, 400.0, 1.6e4).unwrap();
            let status = match run.status {
                RunStatus::BlewUp { t_cross } => format!("blewup t={t_cross:.3}"),
                RunStatus::Survived { t_max } => format!("survived to {t_max}"),
            };
            println!("eps={eps}: {status} ({:?})", t0.elapsed());
        }
    }

    if what == "tstar05" || what == "all" {
        println!("--- t*(eps) for p=2,a=0.5 bump_both at delta=1/400 ---");
        for &eps in &[0.4, 0.3, 0.2, 0.15, 0.1, 0.075, 0.05] {
            let spec = ProblemSpec::new(2.0, 0.5, eps, 1.0, Preset::BumpBoth).unwrap();
            let t0 = Instant::now();
            let run = evolve(&spec, 1.0 / 400.0, 2000.0, 1.6e4).unwrap();
            let status = match run.status {
                RunStatus::BlewUp { t_cross } => format!("blewup t={t_cross:.3}"),
                RunStatus::Survived { t_max } => format!("survived to {t_max}"),
            };
            println!("eps={eps}: {status} ({:?})", t0.elapsed());
        }
    }

    if what == "estimate" || what == "all" {
        println!("--- full estimate_lifespan timing at delta0=1/400 for p2 a0 ---");
        for &eps in &[0.2, 0.0125] {
            let spec = ProblemSpec::new(2.0, 0.0, eps, 1.0, Preset::BumpBoth).unwrap();
            let settings = LifespanSettings {
                delta0: 1.0 / 400.0,
                t_max: 400.0,
                thresholds: vec![1e3, 4e3, 1.6e4],
            };
            let t0 = Instant::now();
            let est = estimate_lifespan(&spec, &settings).unwrap();
            println!(
                "eps={eps}: t*={:.4} [{:.4},{:.4}] refine_ratio={:.2} ({:?})",
                est.t_star, est.t_lo, est.t_hi, est.refinement_ratio, t0.elapsed()
            );
        }
    }

    if what == "sweep" || what == "all" {
        println!("--- dominance sweep (acceptance grid) ---");
        let t0 = Instant::now();
        let reports = dominance_sweep(
            &[1.5, 2.0, 3.0],
            &[-1.0, -0.5, 0.0, 0.5],
            &[0.5, 1.0, 2.0],
            0.01,
        )
        .unwrap();
        println!("{} reports in {:?}", reports.len(), t0.elapsed());
        let mut worst_margin = f64::INFINITY;
        let mut worst_rich: f64 = 0.0;
        for rep in &reports {
            let (p, a, c1, c2) = rep.inputs.params();
            match (rep.t_observed, rep.margin) {
                (Some(tobs), Some(margin)) => {
                    if margin < worst_margin {
                        worst_margin = margin;
                        println!(
                            "  new worst margin {margin:.3e} at {} p={p} a={a} c1={c1} c2={c2} (t_obs={tobs:.3e}, t_bound={:.3e})",
                            rep.lemma.name(),
                            rep.t_bound
                        );
                    }
                    worst_rich = worst_rich.max(rep.richardson_rel.unwrap());
                }
                _ => println!(
                    "  NO BLOW-UP at {} p={p} a={a} c1={c1} c2={c2} (t_bound={:.3e})",
                    rep.lemma.name(),
                    rep.t_bound
                ),
            }
        }
        println!("worst margin {worst_margin:.4e}, worst richardson {worst_rich:.3e}");
    }

    if what == "scaling" || what == "all" {
        println!("--- criterion-7 style scaling with M2 = 0.1 ---");
        for &a in &[0.0, 0.5] {
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for k in 0..=6 {
                let m1 = 0.5f64.powi(k);
                let params = OdeParams { c1: m1, c2: 0.1, p: 2.0, a };
                let o = ode_blowup(OdeKind::LiZhou, &params, 0.0, 0.005).unwrap();
                xs.push(m1.ln());
                ys.push(o.t_observed.ln());
            }
            let (slope, _, _, _) = lifespan_lab::quad::least_squares(&xs, &ys);
            println!("a={a}: slope={slope:.4} (predicted {})", -(1.0) / (1.0 - a));
        }
        // a = 1: log t* linear in 1/M1.
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for k in 0..=6 {
            let m1 = 0.5f64.powi(k);
            let params = OdeParams { c1: m1, c2: 1.0, p: 2.0, a: 1.0 };
            let o = ode_blowup(OdeKind::LiZhou, &params, 0.0, 0.005).unwrap();
            xs.push(1.0 / m1);
            ys.push(o.t_observed.ln());
        }
        let (slope, _, _, r) = lifespan_lab::quad::least_squares(&xs, &ys);
        println!("a=1: slope={slope:.4} pearson={r:.6} max log t*={:.2}", ys.last().unwrap());
    }

    if what == "super" || what == "all" {
        println!("--- supercritical run a=2 eps=0.05 to t=1000 at delta=1/32 ---");
        let spec = ProblemSpec::new(2.0, 2.0, 0.05, 1.0, Preset::BumpBoth).unwrap();
        let t0 = Instant::now();
        let run = evolve(&spec, 1.0 / 32.0, 1000.0, 1e3).unwrap();
        let m1 = run.max_ux_at(1.0).unwrap();
        let m_max = run.max_ux.iter().fold(0.0f64, |a, &b| a.max(b));
        println!(
            "status {:?}, max|ux|(1) = {m1:.5e}, overall max = {m_max:.5e}, ratio {:.3} ({:?})",
            run.status,
            m_max / m1,
            t0.elapsed()
        );
    }

    if what == "crit23" {
        crit23();
    }

    if what == "crit9" {
        crit9();
    }

    if what == "fg1" || what == "all" {
        println!("--- criterion 9 calibration: fg1 run t* and thm2 run ---");
        for &(preset, eps) in &[(Preset::BumpBoth, 0.35f64), (Preset::Thm2, 0.35), (Preset::Thm2, 0.5)] {
            let spec = ProblemSpec::new(2.0, 0.0, eps, 1.0, preset).unwrap();
            let t0 = Instant::now();
            let run = evolve(&spec, 1.0 / 400.0, 200.0, 1.6e4).unwrap();
            let status = match run.status {
                RunStatus::BlewUp { t_cross } => format!("blewup t={t_cross:.3}"),
                RunStatus::Survived { t_max } => format!("survived to {t_max}"),
            };
            println!("{preset:?} eps={eps}: {status} ({:?})", t0.elapsed());
        }
    }
}

#[allow(dead_code)]
fn crit9() {
    use lifespan_lab::functionals::*;
    use lifespan_lab::solver::{evolve_with, EvolveOptions};
    // fg1 H-bound run.
    let spec = ProblemSpec::new(2.0, 0.0, 0.2, 1.0, Preset::BumpBoth).unwrap();
    let delta = 1.0 / 400.0;
    let run = evolve(&spec, delta, 200.0, 1.6e4).unwrap();
    let t_star = match run.status { RunStatus::BlewUp { t_cross } => t_cross, _ => panic!() };
    println!("fg1 run t* = {t_star:.3}");
    let stride = 16;
    let opts = EvolveOptions::new(0.92 * t_star, f64::INFINITY).with_frames(stride);
    let run = evolve_with(&spec, delta, &opts).unwrap();
    let consts = constants(&spec, default_r0(1.0)).unwrap();
    println!("C_f={:.6e} D7={:.6e} lai_tu_C={:.4} M6={:.4} M7={:.4}", consts.c_f, consts.d7, consts.lai_tu_c, consts.m6, consts.m7);
    let h = strip_h(&run, consts.r0, StripVariant::Subcritical).unwrap();
    let verdict = check_power_lower_bound(&h, consts.d7 * spec.eps, 2.0, (4.0, 0.9 * t_star));
    println!("H bound: {} {}", verdict.passed, verdict.detail);

    // thm2 run.
    let spec2 = ProblemSpec::new(2.0, 0.0, 0.5, 1.0, Preset::Thm2).unwrap();
    let run2 = evolve(&spec2, delta, 200.0, 1.6e4).unwrap();
    let t_star2 = match run2.status { RunStatus::BlewUp { t_cross } => t_cross, _ => panic!() };
    println!("thm2 run t* = {t_star2:.3}");
    let stride2 = 16;
    let opts2 = EvolveOptions::new(0.92 * t_star2, f64::INFINITY).with_frames(stride2);
    let run2 = evolve_with(&spec2, delta, &opts2).unwrap();
    let consts2 = constants(&spec2, default_r0(1.0)).unwrap();
    println!("M6={:.5} M7={:.5} M7*eps={:.5}", consts2.m6, consts2.m7, consts2.m7 * spec2.eps);
    let (f, g) = exp_moments(&run2).unwrap();
    // where does G cross the floor?
    let floor = consts2.m7 * spec2.eps;
    let mut crossed = None;
    for k in 0..g.times.len() {
        if g.values[k] >= floor { crossed = Some(g.times[k]); break; }
    }
    println!("G(0) = {:.4e}, floor = {floor:.4e}, G >= floor from t = {crossed:?}", g.values[0]);
    let min_after = g.times.iter().zip(&g.values).filter(|(t, _)| **t >= 2.5).map(|(_, v)| *v - floor).fold(f64::INFINITY, f64::min);
    println!("min(G - floor) for t >= 2.5: {min_after:.4e}");
    let tol = calibrate_tol_fd(&spec2, delta, 0.92 * t_star2, stride2).unwrap();
    println!("tol_fd = {tol:.4e}");
    let res = inequality_residuals(&f, &g, &consts2, 2.0, 0.0).unwrap();
    let v = check_residual_floor(&res.times, &res.gt_residual, tol, (0.0, 0.9 * t_star2));
    println!("Gt residual: {} {}", v.passed, v.detail);
    let v2 = check_integral_inequality(&g, consts2.m6, 0.0, 2.0, (0.0, 0.9 * t_star2), tol);
    println!("Gt2 integral: {} {}", v2.passed, v2.detail);
}

#[allow(dead_code)]
fn crit23() {
    use lifespan_lab::picard::picard_run;
    use lifespan_lab::solver::{evolve_with, representation_residuals, EvolveOptions};
    let delta = 1.0 / 400.0;
    let spec = ProblemSpec::new(2.0, 0.0, 0.1, 1.0, Preset::BumpBoth).unwrap();

    let t0 = Instant::now();
    let opts = EvolveOptions::new(1.0, 1e6).with_frames(1);
    let run = evolve_with(&spec, delta, &opts).unwrap();
    let residuals = representation_residuals(&run, 20, 12345).unwrap();
    let worst = residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    println!("criterion 2: worst residual {worst:.4e} vs bound {:.4e} ({:?})", 10.0 * delta * delta, t0.elapsed());

    let t0 = Instant::now();
    let report = picard_run(&spec, 0.5, delta, 12, 1e-13).unwrap();
    println!("criterion 3: status {:?} ratios {:?} ({:?})", report.status, report.contraction_ratios, t0.elapsed());
    let opts = EvolveOptions::new(0.5, 1e6).with_frames(1);
    let run = evolve_with(&spec, delta, &opts).unwrap();
    let frame = run.frame_near(0.5).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..frame.len() {
        let x = frame.x(i);
        let wp = report.final_field.value_near(x, 0.5);
        worst = worst.max((wp - frame.w[i]).abs());
    }
    println!("criterion 3: field disagreement {worst:.4e} vs bound {:.4e}", 10.0 * delta * delta);
}
