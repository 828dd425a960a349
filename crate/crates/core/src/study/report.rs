//! Report files: CSV tables, log-log SVG plots and JSON.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::runner::StudyOutcome;
use crate::norms_errors::{ConvergenceReport, FitOutcome};
use crate::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: (f64, f64, f64, f64) = (70.0, 20.0, 30.0, 50.0); // left, right, top, bottom
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// `slope=2.00±0.01`.
pub fn slope_annotation(slope: f64, stderr: f64) -> String {
    format!("slope={slope:.2}±{stderr:.2}")
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(contents)?;
    w.flush()?;
    Ok(())
}

/// Writes `<stem>.csv`, `<stem>.svg` and `<stem>.json` under `dir`.
pub fn emit_plot_data(report: &ConvergenceReport, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
    if report.points.len() < 3 {
        return Err(Error::Report(format!(
            "refusing to plot a report with {} points (need at least 3)",
            report.points.len()
        )));
    }
    fs::create_dir_all(dir)?;
    let csv = dir.join(format!("{stem}.csv"));
    let mut buf = Vec::new();
    report.write_csv(&mut buf)?;
    write_file(&csv, &buf)?;
    let svg = dir.join(format!("{stem}.svg"));
    write_file(&svg, render_svg(report).as_bytes())?;
    let json = dir.join(format!("{stem}.json"));
    write_file(&json, serde_json::to_string_pretty(report)?.as_bytes())?;
    Ok(vec![csv, svg, json])
}

/// Every report, the study summary and any exported fields.
pub fn write_outcome(outcome: &StudyOutcome, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (name, report) in &outcome.reports {
        written.extend(emit_plot_data(report, dir, name)?);
    }
    if let Some(single) = &outcome.single {
        let p = dir.join("report.json");
        write_file(&p, serde_json::to_string_pretty(single)?.as_bytes())?;
        written.push(p);
    }
    for (name, field) in &outcome.fields {
        let p = dir.join(format!("field_{name}.csv"));
        let mut buf = Vec::new();
        field.write_csv(&mut buf)?;
        write_file(&p, &buf)?;
        written.push(p);
    }
    let p = dir.join("study.json");
    write_file(&p, serde_json::to_string_pretty(outcome)?.as_bytes())?;
    written.push(p);
    Ok(written)
}

struct Axis {
    lo: f64,
    hi: f64,
    px0: f64,
    px1: f64,
}

impl Axis {
    fn new(values: impl Iterator<Item = f64>, px0: f64, px1: f64) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| *v > 0.0 && v.is_finite()) {
            lo = lo.min(v.log10());
            hi = hi.max(v.log10());
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        let pad = ((hi - lo) * 0.05).max(0.05);
        Axis {
            lo: lo - pad,
            hi: hi + pad,
            px0,
            px1,
        }
    }

    fn map(&self, v: f64) -> f64 {
        self.px0 + (v.log10() - self.lo) / (self.hi - self.lo) * (self.px1 - self.px0)
    }

    fn decades(&self) -> impl Iterator<Item = i32> {
        (self.lo.ceil() as i32)..=(self.hi.floor() as i32)
    }
}

/// Log-log plot of every positive channel value with its fitted line.
pub fn render_svg(report: &ConvergenceReport) -> String {
    let names = report.channel_names();
    let (l, r, t, b) = MARGIN;
    let xs = Axis::new(report.points.iter().map(|p| p.x), l, WIDTH - r);
    let ys = Axis::new(
        report
            .points
            .iter()
            .flat_map(|p| p.channels.values().copied()),
        HEIGHT - b,
        t,
    );
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{l}" y="{t}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        WIDTH - l - r,
        HEIGHT - t - b
    );
    for d in xs.decades() {
        let x = xs.map(10f64.powi(d));
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{t}" x2="{x:.2}" y2="{}" stroke="#ddd"/>"##,
            HEIGHT - b
        );
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{}" text-anchor="middle">1e{d}</text>"#,
            HEIGHT - b + 15.0
        );
    }
    for d in ys.decades() {
        let y = ys.map(10f64.powi(d));
        let _ = writeln!(
            s,
            r##"<line x1="{l}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#ddd"/>"##,
            WIDTH - r
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.2}" text-anchor="end">1e{d}</text>"#,
            l - 5.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (l + WIDTH - r) / 2.0,
        HEIGHT - 12.0,
        report.abscissa
    );
    let (xmin, xmax) = report
        .points
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), p| {
            (a.min(p.x), b.max(p.x))
        });
    for (i, name) in names.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        for (x, y) in report.series(name) {
            if y > 0.0 && y.is_finite() {
                let _ = writeln!(
                    s,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                    xs.map(x),
                    ys.map(y)
                );
            }
        }
        let label = match report.fits.get(name) {
            Some(FitOutcome::Fitted(fit)) => {
                let at = |x: f64| (fit.intercept + fit.slope * x.ln()).exp();
                let _ = writeln!(
                    s,
                    r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}"/>"#,
                    xs.map(xmin),
                    ys.map(at(xmin)),
                    xs.map(xmax),
                    ys.map(at(xmax))
                );
                format!("{name}: {}", slope_annotation(fit.slope, fit.slope_stderr))
            }
            _ => format!("{name}: indeterminate"),
        };
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            l + 8.0,
            t + 14.0 + 13.0 * i as f64,
            label
        );
    }
    s.push_str("</svg>\n");
    s
}
