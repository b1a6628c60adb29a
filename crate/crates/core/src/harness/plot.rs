//! Minimal SVG line/scatter plots. Output depends only on the data passed in,
//! formatted with fixed precision, so identical inputs give identical bytes.

use std::fmt::Write;

const PALETTE: [&str; 8] = ["#c0307a", "#1f5fbf", "#2a9d4b", "#e08a00", "#6a3d9a", "#8c564b", "#17becf", "#555555"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Style {
    Line,
    Markers,
    LineMarkers,
    Dashed,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub style: Style,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>, style: Style) -> Self {
        Series {
            label: label.into(),
            points,
            style,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Figure {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
    /// Draws `y = x` across the plot area.
    pub diagonal: bool,
}

const PANEL_W: f64 = 480.0;
const PANEL_H: f64 = 360.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 36.0;
const MARGIN_B: f64 = 50.0;

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Axis {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            let v = if log { v.log10() } else { v };
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if log {
            lo = lo.floor();
            hi = hi.ceil();
        }
        if hi - lo < 1e-12 {
            let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
            lo -= pad;
            hi += pad;
        } else if !log {
            let pad = 0.05 * (hi - lo);
            lo -= pad;
            hi += pad;
        }
        Axis { lo, hi, log }
    }

    fn frac(&self, v: f64) -> f64 {
        let v = if self.log { v.log10() } else { v };
        (v - self.lo) / (self.hi - self.lo)
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        if self.log {
            let (a, b) = (self.lo as i32, self.hi as i32);
            let step = ((b - a) / 6).max(1);
            (a..=b)
                .step_by(step as usize)
                .map(|e| (10f64.powi(e), format!("1e{e}")))
                .collect()
        } else {
            (0..=4)
                .map(|i| {
                    let v = self.lo + (self.hi - self.lo) * i as f64 / 4.0;
                    (v, format_tick(v))
                })
                .collect()
        }
    }
}

fn format_tick(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e4).contains(&a) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Figure {
    fn usable(&self, p: &(f64, f64)) -> bool {
        p.0.is_finite() && p.1.is_finite() && (!self.log_x || p.0 > 0.0) && (!self.log_y || p.1 > 0.0)
    }

    fn render(&self, ox: f64, oy: f64, out: &mut String) {
        let pts = || self.series.iter().flat_map(|s| s.points.iter()).filter(|p| self.usable(p));
        let mut xs = Axis::fit(pts().map(|p| p.0), self.log_x);
        let mut ys = Axis::fit(pts().map(|p| p.1), self.log_y);
        if self.diagonal && !self.log_x && !self.log_y {
            let lo = xs.lo.min(ys.lo);
            let hi = xs.hi.max(ys.hi);
            xs = Axis { lo, hi, log: false };
            ys = Axis { lo, hi, log: false };
        }
        let (x0, x1) = (ox + MARGIN_L, ox + PANEL_W - MARGIN_R);
        let (y0, y1) = (oy + PANEL_H - MARGIN_B, oy + MARGIN_T);
        let px = |v: f64| x0 + xs.frac(v) * (x1 - x0);
        let py = |v: f64| y0 + ys.frac(v) * (y1 - y0);

        let _ = writeln!(
            out,
            r##"<rect x="{x0:.2}" y="{y1:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#333"/>"##,
            x1 - x0,
            y0 - y1
        );
        for (v, label) in xs.ticks() {
            let x = px(v);
            let _ = writeln!(
                out,
                r##"<line x1="{x:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{y1:.2}" stroke="#ddd" stroke-dasharray="3,3"/><text x="{x:.2}" y="{:.2}" font-size="11" text-anchor="middle">{label}</text>"##,
                y0 + 15.0
            );
        }
        for (v, label) in ys.ticks() {
            let y = py(v);
            let _ = writeln!(
                out,
                r##"<line x1="{x0:.2}" y1="{y:.2}" x2="{x1:.2}" y2="{y:.2}" stroke="#ddd" stroke-dasharray="3,3"/><text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{label}</text>"##,
                x0 - 5.0,
                y + 4.0
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="14" text-anchor="middle">{}</text>"#,
            (x0 + x1) / 2.0,
            oy + 20.0,
            escape(&self.title)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">{}</text>"#,
            (x0 + x1) / 2.0,
            y0 + 36.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle" transform="rotate(-90 {:.2} {:.2})">{}</text>"#,
            ox + 16.0,
            (y0 + y1) / 2.0,
            ox + 16.0,
            (y0 + y1) / 2.0,
            escape(&self.y_label)
        );
        if self.diagonal {
            let (lo, hi) = (xs.lo.max(ys.lo), xs.hi.min(ys.hi));
            let _ = writeln!(
                out,
                r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#888"/>"##,
                px(lo),
                py(lo),
                px(hi),
                py(hi)
            );
        }
        for (i, s) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let visible: Vec<(f64, f64)> = s.points.iter().filter(|p| self.usable(p)).map(|&(x, y)| (px(x), py(y))).collect();
            if matches!(s.style, Style::Line | Style::LineMarkers | Style::Dashed) && visible.len() > 1 {
                let path: Vec<String> = visible.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
                let dash = if s.style == Style::Dashed { r#" stroke-dasharray="6,4""# } else { "" };
                let _ = writeln!(
                    out,
                    r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"{dash}/>"#,
                    path.join(" ")
                );
            }
            if matches!(s.style, Style::Markers | Style::LineMarkers) {
                let radius = if s.style == Style::Markers && visible.len() > 50 { 1.5 } else { 3.0 };
                for (x, y) in &visible {
                    let _ = writeln!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="{radius}" fill="{color}"/>"#);
                }
            }
            let ly = y1 + 14.0 + 16.0 * i as f64;
            let _ = writeln!(
                out,
                r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="3"/><text x="{:.2}" y="{:.2}" font-size="11">{}</text>"#,
                x1 - 150.0,
                x1 - 132.0,
                x1 - 128.0,
                ly + 4.0,
                escape(&s.label)
            );
        }
    }

    pub fn to_svg(&self) -> String {
        panels_svg(std::slice::from_ref(self), 1)
    }
}

/// Lays out figures on a grid with `columns` panels per row.
pub fn panels_svg(figures: &[Figure], columns: usize) -> String {
    let columns = columns.max(1);
    let rows = figures.len().div_ceil(columns).max(1);
    let (w, h) = (PANEL_W * columns.min(figures.len().max(1)) as f64, PANEL_H * rows as f64);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif">"#
    );
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    for (i, f) in figures.iter().enumerate() {
        f.render(PANEL_W * (i % columns) as f64, PANEL_H * (i / columns) as f64, &mut out);
    }
    out.push_str("</svg>\n");
    out
}
