use std::fmt::Write as _;
use std::path::Path;

use super::report::ConvergenceReport;
use crate::{Error, Result};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 520.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 200.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];
const REFERENCE_SLOPES: [f64; 3] = [1.0, 1.5, 2.0];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

struct Axes {
    x: (f64, f64),
    y: (f64, f64),
}

impl Axes {
    fn px(&self, log_tau: f64) -> f64 {
        LEFT + (log_tau - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, log_err: f64) -> f64 {
        HEIGHT - BOTTOM - (log_err - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - TOP - BOTTOM)
    }
}

/// Log-log plot of `mean_err` against τ: one polyline per `(policy, norm)`,
/// dashed reference slopes 1, 1.5 and 2, and a legend.
pub fn render_svg(report: &ConvergenceReport) -> Result<String> {
    let series: Vec<(String, Vec<(f64, f64)>)> = report
        .series_keys()
        .into_iter()
        .map(|(policy, norm)| {
            let pts = report
                .series(&policy, &norm)
                .iter()
                .filter(|r| r.tau > 0.0 && r.mean_err > 0.0)
                .map(|r| (r.tau.log10(), r.mean_err.log10()))
                .collect();
            (format!("{policy} ({norm})"), pts)
        })
        .filter(|(_, pts): &(String, Vec<(f64, f64)>)| !pts.is_empty())
        .collect();
    if series.is_empty() {
        return Err(Error::domain("nothing to plot: the report has no positive errors"));
    }
    let all = series.iter().flat_map(|(_, p)| p.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let axes = Axes { x: (x0.floor().min(x1 - 1.0), x1.ceil().max(x0 + 1.0)), y: (y0.floor(), y1.ceil().max(y0.floor() + 1.0)) };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let (pl, pr, pt, pb) = (LEFT, WIDTH - RIGHT, TOP, HEIGHT - BOTTOM);
    let _ = writeln!(s, r#"<defs><clipPath id="plot"><rect x="{pl}" y="{pt}" width="{}" height="{}"/></clipPath></defs>"#, pr - pl, pb - pt);
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(s, r#"<rect x="{pl}" y="{pt}" width="{}" height="{}" fill="none" stroke="black"/>"#, pr - pl, pb - pt);

    for d in (axes.x.0 as i64)..=(axes.x.1 as i64) {
        let x = axes.px(d as f64);
        let _ = writeln!(s, r##"<line x1="{x:.2}" y1="{pt}" x2="{x:.2}" y2="{pb}" stroke="#ddd"/>"##);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">1e{d}</text>"#, pb + 18.0);
    }
    for d in (axes.y.0 as i64)..=(axes.y.1 as i64) {
        let y = axes.py(d as f64);
        let _ = writeln!(s, r##"<line x1="{pl}" y1="{y:.2}" x2="{pr}" y2="{y:.2}" stroke="#ddd"/>"##);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">1e{d}</text>"#, pl - 6.0, y + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">time step τ</text>"#, (pl + pr) / 2.0, HEIGHT - 15.0);
    let _ = writeln!(
        s,
        r#"<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">error</text>"#,
        (pt + pb) / 2.0,
        (pt + pb) / 2.0
    );

    // Reference slopes pass through the largest error at the largest τ.
    let anchor_y = series.iter().flat_map(|(_, p)| p.iter()).filter(|p| p.0 == x1).map(|p| p.1).fold(y0, f64::max);
    for slope in REFERENCE_SLOPES {
        let ya = anchor_y + 0.3;
        let yb = ya + slope * (x0 - x1);
        let _ = writeln!(
            s,
            r##"<line class="reference" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#555" stroke-dasharray="6 4" clip-path="url(#plot)"/>"##,
            axes.px(x1),
            axes.py(ya),
            axes.px(x0),
            axes.py(yb)
        );
        let _ = writeln!(
            s,
            r##"<text x="{:.2}" y="{:.2}" fill="#555" font-size="10">slope {slope}</text>"##,
            axes.px(x0) + 4.0,
            axes.py(yb).clamp(pt + 10.0, pb - 4.0)
        );
    }

    for (i, (label, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", axes.px(x), axes.py(y))).collect();
        let _ = writeln!(
            s,
            r#"<polyline class="series" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            coords.join(" ")
        );
        for &(x, y) in pts {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, axes.px(x), axes.py(y));
        }
        let ly = pt + 20.0 + 20.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<g class="legend-entry"><line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text></g>"#,
            pr + 15.0,
            pr + 40.0,
            pr + 46.0,
            ly + 4.0,
            escape(label)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn emit_svg(report: &ConvergenceReport, path: &Path) -> Result<()> {
    let svg = render_svg(report)?;
    std::fs::write(path, svg).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}
