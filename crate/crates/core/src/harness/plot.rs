use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::metrics::read_metrics;
use super::stats::{ema, Summary};

pub const SMOOTHING: f64 = 0.9;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 180.0;
const MARGIN_Y: f64 = 40.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// Mean return curve of one configuration across its seeds.
#[derive(Clone, Debug, PartialEq)]
pub struct Curve {
    pub label: String,
    pub steps: Vec<u64>,
    /// Smoothed mean.
    pub mean: Vec<f64>,
    /// Unsmoothed two-standard-error half width.
    pub two_se: Vec<f64>,
    pub seeds: usize,
}

/// `mountain_car_dqn_b32_s4.csv` → `mountain_car_dqn_b32`.
pub fn label_for(path: &Path) -> String {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
    match stem.rfind("_s") {
        Some(i) if i + 2 < stem.len() && stem[i + 2..].bytes().all(|b| b.is_ascii_digit()) => stem[..i].to_owned(),
        _ => stem.to_owned(),
    }
}

/// Groups metrics files by label and averages `avg_return` step by step. Runs of one label
/// are truncated to the shortest among them.
pub fn build_curves(files: &[PathBuf]) -> Result<Vec<Curve>> {
    let mut groups: BTreeMap<String, Vec<Vec<(u64, f64)>>> = BTreeMap::new();
    for f in files {
        let rows = read_metrics(f)?;
        let series = rows.iter().map(|r| (r.step, r.avg_return_last_20)).collect();
        groups.entry(label_for(f)).or_default().push(series);
    }
    let mut curves = Vec::new();
    for (label, runs) in groups {
        let len = runs.iter().map(Vec::len).min().unwrap_or(0);
        if len == 0 {
            continue;
        }
        let steps: Vec<u64> = runs[0][..len].iter().map(|&(s, _)| s).collect();
        let mut raw = Vec::with_capacity(len);
        let mut two_se = Vec::with_capacity(len);
        for i in 0..len {
            let values: Vec<f64> = runs.iter().map(|r| r[i].1).collect();
            let s = Summary::of(&values);
            raw.push(s.mean);
            two_se.push(s.two_se());
        }
        curves.push(Curve {
            label,
            steps,
            mean: ema(&raw, SMOOTHING),
            two_se,
            seeds: runs.len(),
        });
    }
    if curves.is_empty() {
        return Err(Error::Config("no metrics rows to plot".into()));
    }
    Ok(curves)
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn padded_range(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 1.0, hi + 1.0)
    }
}

/// Return-versus-step chart with a shaded ±2 SE band per curve.
pub fn render_svg(curves: &[Curve]) -> String {
    let (mut x_lo, mut x_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_lo, mut y_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for c in curves {
        for (i, &s) in c.steps.iter().enumerate() {
            x_lo = x_lo.min(s as f64);
            x_hi = x_hi.max(s as f64);
            y_lo = y_lo.min(c.mean[i] - c.two_se[i]);
            y_hi = y_hi.max(c.mean[i] + c.two_se[i]);
        }
    }
    let (x_lo, x_hi) = padded_range(x_lo, x_hi);
    let (y_lo, y_hi) = padded_range(y_lo, y_hi);
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - 2.0 * MARGIN_Y;
    let px = |x: f64| MARGIN_LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w;
    let py = |y: f64| MARGIN_Y + (y_hi - y) / (y_hi - y_lo) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let (x0, y0, x1, y1) = (px(x_lo), py(y_lo), px(x_hi), py(y_hi));
    let _ = writeln!(
        svg,
        r#"<path d="M{x0:.1},{y1:.1} L{x0:.1},{y0:.1} L{x1:.1},{y0:.1}" fill="none" stroke="black"/>"#
    );
    for (v, y) in [(y_lo, y0), (y_hi, y1)] {
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end">{v:.1}</text>"#,
            x0 - 6.0,
            y + 4.0
        );
    }
    for (v, x) in [(x_lo, x0), (x_hi, x1)] {
        let _ = writeln!(
            svg,
            r#"<text x="{x:.1}" y="{:.1}" font-size="11" text-anchor="middle">{v:.0}</text>"#,
            y0 + 16.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">step</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 6.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{:.1}" font-size="12" text-anchor="middle" transform="rotate(-90 14 {:.1})">average return</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    );

    for (k, c) in curves.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let upper = c.steps.iter().zip(&c.mean).zip(&c.two_se).map(|((&s, &m), &e)| (px(s as f64), py(m + e)));
        let lower = c.steps.iter().zip(&c.mean).zip(&c.two_se).map(|((&s, &m), &e)| (px(s as f64), py(m - e)));
        let band: Vec<String> = upper
            .chain(lower.rev())
            .map(|(x, y)| format!("{x:.1},{y:.1}"))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
            band.join(" ")
        );
        let line: Vec<String> = c
            .steps
            .iter()
            .zip(&c.mean)
            .map(|(&s, &m)| format!("{:.1},{:.1}", px(s as f64), py(m)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            line.join(" ")
        );
        let ly = MARGIN_Y + 18.0 * k as f64;
        let lx = WIDTH - MARGIN_RIGHT + 12.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/>"#,
            lx + 16.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-size="11">{} (n={})</text>"#,
            lx + 20.0,
            ly + 4.0,
            escape(&c.label),
            c.seeds
        );
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn emit_plot(files: &[PathBuf], out: &Path) -> Result<()> {
    let curves = build_curves(files)?;
    if let Some(dir) = out.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    std::fs::write(out, render_svg(&curves)).map_err(|e| Error::io(out, e))
}
