//! Minimal deterministic SVG line charts: a grid of panels, each with a few
//! polylines. Coordinates are printed with fixed precision so identical
//! inputs give identical bytes.

use std::fmt::Write as _;

pub const TRUTH: &str = "#1f4fd8";
pub const LEARNED: &str = "#d62728";

pub struct Series {
    pub label: String,
    pub color: &'static str,
    pub points: Vec<(f64, f64)>,
}

pub struct Panel {
    pub title: String,
    pub series: Vec<Series>,
    /// Plot y on a log10 axis (non-positive values are dropped).
    pub log_y: bool,
}

const PANEL_W: f64 = 320.0;
const PANEL_H: f64 = 200.0;
const MARGIN: f64 = 40.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-300 {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.5 };
        return (lo - pad, hi + pad);
    }
    (lo, hi)
}

/// Render panels in a grid with `columns` columns.
pub fn chart(title: &str, panels: &[Panel], columns: usize) -> String {
    let columns = columns.max(1);
    let rows = panels.len().div_ceil(columns).max(1);
    let cell_w = PANEL_W + MARGIN * 1.5;
    let cell_h = PANEL_H + MARGIN * 1.5;
    let width = cell_w * columns as f64 + MARGIN;
    let height = cell_h * rows as f64 + MARGIN * 1.5;
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="11">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="{:.1}" y="20" font-size="14" text-anchor="middle">{}</text>"#, width / 2.0, escape(title)).unwrap();
    for (idx, panel) in panels.iter().enumerate() {
        let x0 = MARGIN + (idx % columns) as f64 * cell_w;
        let y0 = MARGIN * 1.5 + (idx / columns) as f64 * cell_h;
        let tf = |y: f64| if panel.log_y { y.log10() } else { y };
        let keep = |y: &f64| !panel.log_y || *y > 0.0;
        let (xl, xh) = bounds(panel.series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
        let (yl, yh) = bounds(panel.series.iter().flat_map(|s| s.points.iter().filter(|p| keep(&p.1)).map(|p| tf(p.1))));
        let px = |x: f64| x0 + (x - xl) / (xh - xl) * PANEL_W;
        let py = |y: f64| y0 + PANEL_H - (y - yl) / (yh - yl) * PANEL_H;
        writeln!(
            s,
            r##"<rect x="{x0:.1}" y="{y0:.1}" width="{PANEL_W:.1}" height="{PANEL_H:.1}" fill="none" stroke="#444"/>"##
        )
        .unwrap();
        writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, x0 + PANEL_W / 2.0, y0 - 6.0, escape(&panel.title)).unwrap();
        let ylab = |v: f64| if panel.log_y { format!("1e{v:.1}") } else { format!("{v:.3e}") };
        writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, x0 - 3.0, y0 + 10.0, ylab(yh)).unwrap();
        writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, x0 - 3.0, y0 + PANEL_H, ylab(yl)).unwrap();
        writeln!(s, r#"<text x="{x0:.1}" y="{:.1}">{xl:.2}</text>"#, y0 + PANEL_H + 13.0).unwrap();
        writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{xh:.2}</text>"#, x0 + PANEL_W, y0 + PANEL_H + 13.0).unwrap();
        for (k, series) in panel.series.iter().enumerate() {
            let mut pts = String::new();
            for (x, y) in series.points.iter().filter(|p| keep(&p.1) && p.1.is_finite()) {
                write!(pts, "{:.2},{:.2} ", px(*x), py(tf(*y))).unwrap();
            }
            writeln!(
                s,
                r#"<polyline fill="none" stroke="{}" stroke-width="1.2" points="{}"/>"#,
                series.color,
                pts.trim_end()
            )
            .unwrap();
            let ly = y0 + 12.0 + 12.0 * k as f64;
            writeln!(
                s,
                r#"<text x="{:.1}" y="{ly:.1}" fill="{}" text-anchor="end">{}</text>"#,
                x0 + PANEL_W - 4.0,
                series.color,
                escape(&series.label)
            )
            .unwrap();
        }
    }
    s.push_str("</svg>\n");
    s
}
