//! Deterministic result emission: CSV tables and an SVG scatter of the
//! lifespan scaling. Identical inputs produce byte-identical files.

use crate::error::{Error, Result};
use crate::harness::{FitReport, Regime, ScanTable};

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Svg,
}

impl Format {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "csv" => Ok(Format::Csv),
            "svg" => Ok(Format::Svg),
            other => Err(Error::Config(format!("unknown output format `{other}`"))),
        }
    }
}

pub fn scan_csv(table: &ScanTable) -> String {
    let mut out = String::from("eps,delta_finest,t_star,t_lo,t_hi,status\n");
    for row in &table.rows {
        let status = if row.survived { "survived" } else { "blewup" };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            row.eps, row.delta_finest, row.t_star, row.t_lo, row.t_hi, status
        );
    }
    out
}

/// Scatter of `log t*` against `log eps` with the fitted line when a
/// power-regime fit is supplied and at least two blow-up rows exist.
pub fn scan_svg(table: &ScanTable, fit: Option<&FitReport>) -> String {
    let pts: Vec<(f64, f64)> = table
        .blown_rows()
        .iter()
        .map(|r| (r.eps.ln(), r.t_star.ln()))
        .collect();
    let (w, h) = (640.0, 480.0);
    let margin = 60.0;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">"
    );
    let _ = writeln!(svg, "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>");
    if pts.is_empty() {
        let _ = writeln!(
            svg,
            "<text x=\"{:.3}\" y=\"{:.3}\" font-size=\"14\">no blow-up rows</text>",
            margin,
            h / 2.0
        );
        svg.push_str("</svg>\n");
        return svg;
    }
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let pad = |lo: &mut f64, hi: &mut f64| {
        let span = (*hi - *lo).max(1e-9);
        *lo -= 0.05 * span;
        *hi += 0.05 * span;
    };
    pad(&mut x0, &mut x1);
    pad(&mut y0, &mut y1);
    let sx = |x: f64| margin + (x - x0) / (x1 - x0) * (w - 2.0 * margin);
    let sy = |y: f64| h - margin - (y - y0) / (y1 - y0) * (h - 2.0 * margin);

    let _ = writeln!(
        svg,
        "<line x1=\"{:.3}\" y1=\"{:.3}\" x2=\"{:.3}\" y2=\"{:.3}\" stroke=\"black\"/>",
        margin,
        h - margin,
        w - margin,
        h - margin
    );
    let _ = writeln!(
        svg,
        "<line x1=\"{:.3}\" y1=\"{:.3}\" x2=\"{:.3}\" y2=\"{:.3}\" stroke=\"black\"/>",
        margin,
        margin,
        margin,
        h - margin
    );
    let _ = writeln!(
        svg,
        "<text x=\"{:.3}\" y=\"{:.3}\" font-size=\"12\">log eps</text>",
        w / 2.0 - 20.0,
        h - margin / 3.0
    );
    let _ = writeln!(
        svg,
        "<text x=\"{:.3}\" y=\"{:.3}\" font-size=\"12\" transform=\"rotate(-90 {:.3} {:.3})\">log t*</text>",
        margin / 3.0,
        h / 2.0,
        margin / 3.0,
        h / 2.0
    );
    let _ = writeln!(
        svg,
        "<text x=\"{:.3}\" y=\"{:.3}\" font-size=\"10\">{:.3}</text>",
        margin,
        h - margin + 14.0,
        x0
    );
    let _ = writeln!(
        svg,
        "<text x=\"{:.3}\" y=\"{:.3}\" font-size=\"10\">{:.3}</text>",
        w - margin - 20.0,
        h - margin + 14.0,
        x1
    );

    if pts.len() >= 2 {
        if let Some(fit) = fit {
            if fit.regime == Regime::Power && fit.slope.is_finite() {
                let ya = fit.intercept + fit.slope * x0;
                let yb = fit.intercept + fit.slope * x1;
                let _ = writeln!(
                    svg,
                    "<line x1=\"{:.3}\" y1=\"{:.3}\" x2=\"{:.3}\" y2=\"{:.3}\" stroke=\"#1f77b4\" stroke-width=\"1.5\"/>",
                    sx(x0),
                    sy(ya),
                    sx(x1),
                    sy(yb)
                );
            }
        }
    }
    for &(x, y) in &pts {
        let _ = writeln!(
            svg,
            "<circle cx=\"{:.3}\" cy=\"{:.3}\" r=\"4\" fill=\"#d62728\"/>",
            sx(x),
            sy(y)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Writes the requested formats into `out_dir`, returning the paths.
pub fn emit(
    table: &ScanTable,
    fit: Option<&FitReport>,
    out_dir: &Path,
    formats: &[Format],
) -> Result<Vec<PathBuf>> {
    if table.rows.is_empty() {
        return Err(Error::EmptyResults);
    }
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    for format in formats {
        match format {
            Format::Csv => {
                let path = out_dir.join("scan.csv");
                fs::write(&path, scan_csv(table))?;
                written.push(path);
            }
            Format::Svg => {
                let path = out_dir.join("scan.svg");
                fs::write(&path, scan_svg(table, fit))?;
                written.push(path);
            }
        }
    }
    Ok(written)
}
