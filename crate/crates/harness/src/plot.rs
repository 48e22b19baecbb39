//! Minimal self-contained SVG line plots.
//!
//! Every chart uses a fixed `960×480` viewBox with panels stacked vertically.
//! Coordinates are written with two decimals, so output is byte-stable.

use std::fmt::Write as _;

pub const WIDTH: f64 = 960.0;
pub const HEIGHT: f64 = 480.0;

/// Polylines longer than this are reduced to per-bucket extrema.
pub const MAX_POINTS: usize = 2000;

/// Log panels show at most this many decades below their maximum; lower
/// values are drawn on the floor.
pub const MAX_DECADES: f64 = 24.0;

const MARGIN_LEFT: f64 = 78.0;
const MARGIN_RIGHT: f64 = 150.0;
const MARGIN_TOP: f64 = 26.0;
const MARGIN_BOTTOM: f64 = 30.0;

pub const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub color: &'static str,
    pub dashed: bool,
}

impl Series {
    pub fn new(label: impl Into<String>, color: &'static str, points: Vec<(f64, f64)>) -> Self {
        Self {
            label: label.into(),
            points,
            color,
            dashed: false,
        }
    }

    pub fn dashed(mut self) -> Self {
        self.dashed = true;
        self
    }
}

/// A horizontal reference line.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub y: f64,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub log_y: bool,
    pub series: Vec<Series>,
    pub rules: Vec<Rule>,
}

impl Panel {
    pub fn new(title: impl Into<String>, x_label: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            ..Self::default()
        }
    }

    pub fn log(mut self) -> Self {
        self.log_y = true;
        self
    }

    pub fn with(mut self, s: Series) -> Self {
        self.series.push(s);
        self
    }

    pub fn rule(mut self, y: f64, label: impl Into<String>) -> Self {
        self.rules.push(Rule { y, label: label.into() });
        self
    }
}

/// Keeps the first and last point and, for each bucket in between, the
/// smallest and largest y in their original order. Spikes survive.
pub fn decimate(points: &[(f64, f64)], max: usize) -> Vec<(f64, f64)> {
    if points.len() <= max || max < 4 {
        return points.to_vec();
    }
    let buckets = (max - 2) / 2;
    let inner = &points[1..points.len() - 1];
    let size = inner.len().div_ceil(buckets);
    let mut out = Vec::with_capacity(max);
    out.push(points[0]);
    for chunk in inner.chunks(size) {
        let mut lo = 0;
        let mut hi = 0;
        for (i, p) in chunk.iter().enumerate() {
            if p.1 < chunk[lo].1 {
                lo = i;
            }
            if p.1 > chunk[hi].1 {
                hi = i;
            }
        }
        out.push(chunk[lo.min(hi)]);
        if lo != hi {
            out.push(chunk[lo.max(hi)]);
        }
    }
    out.push(points[points.len() - 1]);
    out
}

fn transform(y: f64, log: bool) -> Option<f64> {
    let v = if log {
        if y > 0.0 {
            y.log10()
        } else {
            return None;
        }
    } else {
        y
    };
    v.is_finite().then_some(v)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn tick_label(v: f64, log: bool) -> String {
    if log {
        format!("1e{v:.1}")
    } else if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    left: f64,
    top: f64,
    w: f64,
    h: f64,
}

impl Frame {
    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        let px = self.left + (x - self.x0) / (self.x1 - self.x0) * self.w;
        let py = self.top + self.h - (y - self.y0) / (self.y1 - self.y0) * self.h;
        (px, py)
    }
}

fn widen(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        return (0.0, 1.0);
    }
    if hi > lo {
        let pad = 0.04 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        let d = if lo == 0.0 { 1.0 } else { 0.05 * lo.abs() };
        (lo - d, hi + d)
    }
}

fn draw_panel(out: &mut String, panel: &Panel, top: f64, height: f64) {
    let mut prepared: Vec<(&Series, Vec<(f64, f64)>)> = panel
        .series
        .iter()
        .map(|s| {
            let pts: Vec<(f64, f64)> = s
                .points
                .iter()
                .filter_map(|&(x, y)| Some((x, transform(y, panel.log_y)?)).filter(|p| p.0.is_finite()))
                .collect();
            (s, decimate(&pts, MAX_POINTS))
        })
        .collect();
    let rules: Vec<(f64, &str)> = panel
        .rules
        .iter()
        .filter_map(|r| Some((transform(r.y, panel.log_y)?, r.label.as_str())))
        .collect();

    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (_, pts) in &prepared {
        for &(x, y) in pts {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
    }
    for &(y, _) in &rules {
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if panel.log_y {
        y0 = y0.max(y1 - MAX_DECADES);
    }
    let (y0, y1) = widen(y0, y1);
    let (x0, x1) = if x1 > x0 { (x0, x1) } else { widen(x0, x1) };
    for (_, pts) in &mut prepared {
        for p in pts.iter_mut() {
            p.1 = p.1.max(y0);
        }
    }
    let f = Frame {
        x0,
        x1,
        y0,
        y1,
        left: MARGIN_LEFT,
        top: top + MARGIN_TOP,
        w: WIDTH - MARGIN_LEFT - MARGIN_RIGHT,
        h: height - MARGIN_TOP - MARGIN_BOTTOM,
    };

    let _ = writeln!(
        out,
        r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#444"/>"##,
        f.left, f.top, f.w, f.h
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" font-size="13">{}</text>"#,
        f.left,
        f.top - 8.0,
        escape(&panel.title)
    );
    for (v, anchor_y) in [(y1, f.top + 4.0), (y0, f.top + f.h)] {
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="10" text-anchor="end">{}</text>"#,
            f.left - 4.0,
            anchor_y + 4.0,
            tick_label(v, panel.log_y)
        );
    }
    let base = f.top + f.h + 14.0;
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{base:.2}" font-size="10">{}</text>"#,
        f.left,
        tick_label(x0, false)
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{base:.2}" font-size="10" text-anchor="end">{}</text>"#,
        f.left + f.w,
        tick_label(x1, false)
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{base:.2}" font-size="11" text-anchor="middle">{}</text>"#,
        f.left + f.w / 2.0,
        escape(&panel.x_label)
    );

    for &(y, label) in &rules {
        let (_, py) = f.map(x0, y);
        let _ = writeln!(
            out,
            r##"<line x1="{:.2}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#000" stroke-dasharray="2 3"/>"##,
            f.left,
            f.left + f.w
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="10">{}</text>"#,
            f.left + f.w + 4.0,
            py + 3.0,
            escape(label)
        );
    }

    for (k, (s, pts)) in prepared.iter().enumerate() {
        let dash = if s.dashed { r#" stroke-dasharray="6 4""# } else { "" };
        if pts.len() == 1 {
            let (px, py) = f.map(pts[0].0, pts[0].1);
            let _ = writeln!(out, r#"<circle cx="{px:.2}" cy="{py:.2}" r="3" fill="{}"/>"#, s.color);
        } else if !pts.is_empty() {
            let mut coords = String::with_capacity(pts.len() * 16);
            for (i, &(x, y)) in pts.iter().enumerate() {
                let (px, py) = f.map(x, y);
                if i > 0 {
                    coords.push(' ');
                }
                let _ = write!(coords, "{px:.2},{py:.2}");
            }
            let _ = writeln!(
                out,
                r#"<polyline fill="none" stroke="{}" stroke-width="1"{dash} points="{coords}"/>"#,
                s.color
            );
        }
        let ly = f.top + 10.0 + 14.0 * k as f64;
        let lx = f.left + f.w + 8.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{}"{dash}/>"#,
            lx + 16.0,
            s.color
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="10">{}</text>"#,
            lx + 20.0,
            ly + 3.0,
            escape(&s.label)
        );
    }
}

/// Renders the panels top to bottom, each taking an equal share of the height.
pub fn render(title: &str, panels: &[Panel]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif">"#
    );
    let _ = writeln!(out, "<title>{}</title>", escape(title));
    let _ = writeln!(out, r##"<rect width="{WIDTH}" height="{HEIGHT}" fill="#fff"/>"##);
    let h = HEIGHT / panels.len().max(1) as f64;
    for (i, p) in panels.iter().enumerate() {
        draw_panel(&mut out, p, h * i as f64, h);
    }
    out.push_str("</svg>\n");
    out
}
