//! Deterministic SVG scatter plots of 2D points.

use std::fmt::Write;

pub const WIDTH: f64 = 480.0;
pub const HEIGHT: f64 = 480.0;
const PAD: f64 = 24.0;
pub const POINT_RADIUS: f64 = 1.5;
const CROSS_HALF: f64 = 4.0;
const MARGIN_FRAC: f64 = 0.05;

/// Data-space bounds mapped onto the drawing area.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Viewport {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Viewport {
    /// Bounding box of all points with a 5% margin on each side. Degenerate
    /// extents are widened to one unit; no points gives `[-1, 1]^2`.
    pub fn fit<'a>(points: impl IntoIterator<Item = &'a [f64; 2]>) -> Self {
        let mut b = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
        for p in points {
            b[0] = b[0].min(p[0]);
            b[1] = b[1].max(p[0]);
            b[2] = b[2].min(p[1]);
            b[3] = b[3].max(p[1]);
        }
        if b[0] > b[1] {
            return Self { x_min: -1.0, x_max: 1.0, y_min: -1.0, y_max: 1.0 };
        }
        let widen = |lo: f64, hi: f64| {
            let span = if hi > lo { hi - lo } else { 1.0 };
            let mid = (lo + hi) / 2.0;
            let (lo, hi) = if hi > lo { (lo, hi) } else { (mid - 0.5, mid + 0.5) };
            (lo - MARGIN_FRAC * span, hi + MARGIN_FRAC * span)
        };
        let (x_min, x_max) = widen(b[0], b[1]);
        let (y_min, y_max) = widen(b[2], b[3]);
        Self { x_min, x_max, y_min, y_max }
    }

    /// Pixel position of a data point (y grows downward in SVG).
    pub fn map(&self, p: [f64; 2]) -> (f64, f64) {
        let w = WIDTH - 2.0 * PAD;
        let h = HEIGHT - 2.0 * PAD;
        (
            PAD + (p[0] - self.x_min) / (self.x_max - self.x_min) * w,
            PAD + (self.y_max - p[1]) / (self.y_max - self.y_min) * h,
        )
    }
}

/// Renders points as small circles and centers as crosses.
pub fn scatter(points: &[[f64; 2]], centers: &[[f64; 2]]) -> String {
    let vp = Viewport::fit(points.iter().chain(centers));
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let (x0, y0) = (PAD, HEIGHT - PAD);
    let _ = writeln!(
        s,
        r#"<g id="axes" stroke="black" stroke-width="1"><line x1="{x0:.3}" y1="{y0:.3}" x2="{:.3}" y2="{y0:.3}"/><line x1="{x0:.3}" y1="{y0:.3}" x2="{x0:.3}" y2="{PAD:.3}"/></g>"#,
        WIDTH - PAD
    );
    let _ = writeln!(
        s,
        r#"<g id="labels" font-family="monospace" font-size="10" fill="black"><text x="{x0:.3}" y="{:.3}">{:.3}</text><text x="{:.3}" y="{:.3}" text-anchor="end">{:.3}</text><text x="2" y="{y0:.3}">{:.3}</text><text x="2" y="{:.3}">{:.3}</text></g>"#,
        y0 + 14.0,
        vp.x_min,
        WIDTH - PAD,
        y0 + 14.0,
        vp.x_max,
        vp.y_min,
        PAD + 4.0,
        vp.y_max
    );
    let _ = writeln!(s, r##"<g id="points" fill="#1f77b4">"##);
    for &p in points {
        let (x, y) = vp.map(p);
        let _ = writeln!(s, r#"<circle cx="{x:.3}" cy="{y:.3}" r="{POINT_RADIUS}"/>"#);
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r##"<g id="centers" stroke="#d62728" stroke-width="1.5">"##);
    for &c in centers {
        let (x, y) = vp.map(c);
        let h = CROSS_HALF;
        let _ = writeln!(
            s,
            r#"<path d="M{:.3} {:.3}L{:.3} {:.3}M{:.3} {:.3}L{:.3} {:.3}"/>"#,
            x - h,
            y - h,
            x + h,
            y + h,
            x - h,
            y + h,
            x + h,
            y - h
        );
    }
    let _ = writeln!(s, "</g>");
    s.push_str("</svg>\n");
    s
}

/// Circle centers in pixel space, in document order.
pub fn circle_positions(svg: &str) -> Vec<(f64, f64)> {
    let attr = |line: &str, name: &str| -> Option<f64> {
        let key = format!(r#" {name}=""#);
        let start = line.find(&key)? + key.len();
        let end = start + line[start..].find('"')?;
        line[start..end].parse().ok()
    };
    svg.lines()
        .filter(|l| l.starts_with("<circle"))
        .filter_map(|l| Some((attr(l, "cx")?, attr(l, "cy")?)))
        .collect()
}
