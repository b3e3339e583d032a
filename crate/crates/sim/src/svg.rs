//! Minimal static SVG line and scatter plots.

use std::fmt::Write;

use funnel_mpc::{Method, RunRecord};

use crate::batch::{Outcome, SummaryRow};
use crate::output::{ellipse_points, rho_label};

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];
const WIDTH: f64 = 760.0;
const PANEL_H: f64 = 230.0;
const MARGIN_L: f64 = 78.0;
const MARGIN_R: f64 = 150.0;
const MARGIN_T: f64 = 34.0;
const MARGIN_B: f64 = 42.0;

pub struct Series {
    pub label: String,
    pub points: Vec<[f64; 2]>,
    pub color: &'static str,
    pub dashed: bool,
    /// Draw markers instead of a polyline.
    pub scatter: bool,
}

pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn nice_step(range: f64) -> f64 {
    let raw = range / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    mag * if f < 1.5 {
        1.0
    } else if f < 3.5 {
        2.0
    } else if f < 7.5 {
        5.0
    } else {
        10.0
    }
}

fn tick_label(v: f64, step: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if step >= 1e-2 && v.abs() < 1e5 {
        let digits = (-step.log10().floor()).max(0.0) as usize;
        format!("{v:.digits$}")
    } else {
        format!("{v:.1e}")
    }
}

fn bounds(series: &[Series], axis: usize) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in series.iter().flat_map(|s| &s.points).filter(|p| p[0].is_finite() && p[1].is_finite()) {
        lo = lo.min(p[axis]);
        hi = hi.max(p[axis]);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo <= 1e-12 * (1.0 + lo.abs()) {
        let pad = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
        return (lo - pad, hi + pad);
    }
    (lo, hi)
}

fn render_panel(out: &mut String, panel: &Panel, top: f64) {
    let (x0, x1) = bounds(&panel.series, 0);
    let (y0, y1) = bounds(&panel.series, 1);
    let (pw, ph) = (WIDTH - MARGIN_L - MARGIN_R, PANEL_H - MARGIN_T - MARGIN_B);
    let px = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * pw;
    let py = |y: f64| top + MARGIN_T + (1.0 - (y - y0) / (y1 - y0)) * ph;
    let _ = writeln!(out, r##"<text x="{}" y="{:.1}" font-size="13" font-weight="bold">{}</text>"##, MARGIN_L, top + 20.0, escape(&panel.title));
    let _ = writeln!(
        out,
        r##"<rect x="{MARGIN_L}" y="{:.1}" width="{pw:.1}" height="{ph:.1}" fill="none" stroke="#444"/>"##,
        top + MARGIN_T
    );
    for (lo, hi, is_x) in [(x0, x1, true), (y0, y1, false)] {
        let step = nice_step(hi - lo);
        let mut t = (lo / step).ceil() * step;
        while t <= hi + 1e-9 * step {
            if is_x {
                let x = px(t);
                let yb = top + MARGIN_T + ph;
                let _ = writeln!(out, r##"<line x1="{x:.1}" y1="{yb:.1}" x2="{x:.1}" y2="{:.1}" stroke="#444"/>"##, yb + 4.0);
                let _ = writeln!(
                    out,
                    r##"<text x="{x:.1}" y="{:.1}" font-size="10" text-anchor="middle">{}</text>"##,
                    yb + 15.0,
                    tick_label(t, step)
                );
            } else {
                let y = py(t);
                let _ = writeln!(out, r##"<line x1="{:.1}" y1="{y:.1}" x2="{MARGIN_L}" y2="{y:.1}" stroke="#444"/>"##, MARGIN_L - 4.0);
                let _ = writeln!(
                    out,
                    r##"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">{}</text>"##,
                    MARGIN_L - 6.0,
                    y + 3.5,
                    tick_label(t, step)
                );
            }
            t += step;
        }
    }
    let _ = writeln!(
        out,
        r##"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">{}</text>"##,
        MARGIN_L + 0.5 * pw,
        top + PANEL_H - 6.0,
        escape(&panel.x_label)
    );
    let (lx, ly) = (16.0, top + MARGIN_T + 0.5 * ph);
    let _ = writeln!(
        out,
        r##"<text x="{lx}" y="{ly:.1}" font-size="11" text-anchor="middle" transform="rotate(-90 {lx} {ly:.1})">{}</text>"##,
        escape(&panel.y_label)
    );
    for (i, s) in panel.series.iter().enumerate() {
        let pts: Vec<[f64; 2]> = s.points.iter().filter(|p| p[0].is_finite() && p[1].is_finite()).copied().collect();
        if s.scatter {
            for p in &pts {
                let _ = writeln!(out, r##"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{}" fill-opacity="0.6"/>"##, px(p[0]), py(p[1]), s.color);
            }
        } else if !pts.is_empty() {
            let path: Vec<String> = pts.iter().map(|p| format!("{:.2},{:.2}", px(p[0]), py(p[1]))).collect();
            let dash = if s.dashed { r##" stroke-dasharray="5,3""## } else { "" };
            let _ = writeln!(
                out,
                r##"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.3"{dash}/>"##,
                path.join(" "),
                s.color
            );
        }
        let ly = top + MARGIN_T + 8.0 + 15.0 * i as f64;
        let lx = WIDTH - MARGIN_R + 10.0;
        let _ = writeln!(out, r##"<rect x="{lx:.1}" y="{:.1}" width="12" height="3" fill="{}"/>"##, ly - 3.0, s.color);
        let _ = writeln!(out, r##"<text x="{:.1}" y="{ly:.1}" font-size="10">{}</text>"##, lx + 16.0, escape(&s.label));
    }
}

pub fn render(title: &str, panels: &[Panel]) -> String {
    let height = 30.0 + PANEL_H * panels.len() as f64;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif">"##
    );
    let _ = writeln!(out, r##"<rect width="100%" height="100%" fill="white"/>"##);
    let _ = writeln!(out, r##"<text x="{}" y="20" font-size="15" text-anchor="middle">{}</text>"##, WIDTH / 2.0, escape(title));
    for (i, p) in panels.iter().enumerate() {
        render_panel(&mut out, p, 30.0 + PANEL_H * i as f64);
    }
    out.push_str("</svg>\n");
    out
}

/// Lateral offset, curvature and input over arc length for one or more runs.
pub fn run_panels(title: &str, runs: &[(&str, &RunRecord)]) -> String {
    let line = |label: &str, i: usize, f: &dyn Fn(&funnel_mpc::StepRecord) -> f64, r: &RunRecord| Series {
        label: label.into(),
        points: r.steps.iter().map(|s| [s.s, f(s)]).collect(),
        color: PALETTE[i % PALETTE.len()],
        dashed: false,
        scatter: false,
    };
    let mut d = Vec::new();
    let mut kappa = Vec::new();
    let mut u = Vec::new();
    for (i, (label, r)) in runs.iter().enumerate() {
        d.push(line(label, i, &|s| s.state.d, r));
        kappa.push(line(label, i, &|s| s.state.kappa, r));
        u.push(line(label, i, &|s| s.input, r));
    }
    if let Some((_, r)) = runs.first() {
        let mut truth = line("ground truth", runs.len(), &|s| s.reference.kappa, r);
        truth.color = "#000000";
        truth.dashed = true;
        kappa.push(truth);
    }
    let panel = |title: &str, y: &str, series| Panel { title: title.into(), x_label: "s (m)".into(), y_label: y.into(), series };
    render(
        title,
        &[
            panel("lateral displacement", "d (m)", d),
            panel("curvature", "kappa (1/m)", kappa),
            panel("input", "u", u),
        ],
    )
}

/// Deviation cost against input cost per run, with one-sigma ellipses per group.
pub fn metric_scatter(outcomes: &[Outcome], summary: &[SummaryRow]) -> String {
    let mut series = Vec::new();
    for (i, row) in summary.iter().enumerate() {
        let label = match row.rho {
            Some(r) => format!("{} rho={}", row.method, rho_label(r)),
            None => row.method.to_string(),
        };
        let color = PALETTE[i % PALETTE.len()];
        let points = outcomes
            .iter()
            .filter(|o| o.method == row.method && o.rho.map(f64::to_bits) == row.rho.map(f64::to_bits))
            .filter_map(|o| o.result.as_ref().ok())
            .map(|r| [r.metrics.deviation_cost, r.metrics.input_cost])
            .collect();
        series.push(Series { label: label.clone(), points, color, dashed: false, scatter: true });
        if let Some(e) = ellipse_points(row, 64) {
            series.push(Series { label: format!("{label} 1-sigma"), points: e, color, dashed: row.method != Method::Funnel, scatter: false });
        }
    }
    render(
        "closed-loop costs",
        &[Panel { title: "deviation vs input cost".into(), x_label: "J^x".into(), y_label: "J^u".into(), series }],
    )
}
