//! Drawing documents made on top of a scaffold, and their SVG export.

use std::fmt::Write as _;

use clipscaffold::model::Rgba;
use serde::{Deserialize, Serialize};

pub type Point = [f64; 2];

fn default_extent() -> f64 {
    512.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DrawingDoc {
    /// Canvas size in drawing units.
    #[serde(default = "default_extent")]
    pub width: f64,
    #[serde(default = "default_extent")]
    pub height: f64,
    /// Elements in paint order, first is bottom-most.
    pub layers: Vec<Element>,
    /// Hidden guide strokes, kept but never exported.
    #[serde(default)]
    pub sketch: Vec<Vec<Point>>,
}

/// The six drawing tools.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Element {
    Line {
        from: Point,
        to: Point,
        stroke: Rgba,
        stroke_width: f64,
    },
    /// Circular arc from `start` to `end` passing through `bulge`.
    Arc {
        start: Point,
        end: Point,
        bulge: Point,
        stroke: Rgba,
        stroke_width: f64,
    },
    /// Chain of cubic segments; each entry holds two controls and an end.
    Freeform {
        start: Point,
        segments: Vec<[Point; 3]>,
        stroke: Rgba,
        stroke_width: f64,
    },
    Rectangle {
        x: f64,
        y: f64,
        width: f64,
        height: f64,
        #[serde(default)]
        fill: Option<Rgba>,
    },
    Ellipse {
        cx: f64,
        cy: f64,
        rx: f64,
        ry: f64,
        #[serde(default)]
        fill: Option<Rgba>,
    },
    RoundedRectangle {
        x: f64,
        y: f64,
        width: f64,
        height: f64,
        radius: f64,
        #[serde(default)]
        fill: Option<Rgba>,
    },
}

impl Element {
    pub fn kind(&self) -> &'static str {
        match self {
            Element::Line { .. } => "line",
            Element::Arc { .. } => "arc",
            Element::Freeform { .. } => "freeform",
            Element::Rectangle { .. } => "rectangle",
            Element::Ellipse { .. } => "ellipse",
            Element::RoundedRectangle { .. } => "rounded_rectangle",
        }
    }

    fn numbers(&self) -> Vec<f64> {
        match self {
            Element::Line {
                from, to, stroke_width, ..
            } => vec![from[0], from[1], to[0], to[1], *stroke_width],
            Element::Arc {
                start,
                end,
                bulge,
                stroke_width,
                ..
            } => {
                vec![start[0], start[1], end[0], end[1], bulge[0], bulge[1], *stroke_width]
            }
            Element::Freeform {
                start,
                segments,
                stroke_width,
                ..
            } => {
                let mut v = vec![start[0], start[1], *stroke_width];
                v.extend(segments.iter().flatten().flatten());
                v
            }
            Element::Rectangle {
                x, y, width, height, ..
            } => vec![*x, *y, *width, *height],
            Element::Ellipse { cx, cy, rx, ry, .. } => vec![*cx, *cy, *rx, *ry],
            Element::RoundedRectangle {
                x,
                y,
                width,
                height,
                radius,
                ..
            } => {
                vec![*x, *y, *width, *height, *radius]
            }
        }
    }
}

impl DrawingDoc {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.width > 0.0 && self.height > 0.0 && self.width.is_finite() && self.height.is_finite()) {
            return Err("canvas size must be positive".into());
        }
        for (i, el) in self.layers.iter().enumerate() {
            if el.numbers().iter().any(|v| !v.is_finite()) {
                return Err(format!("element {i}: non-finite coordinate"));
            }
            let ok = match el {
                Element::Line { stroke_width, .. } | Element::Arc { stroke_width, .. } => *stroke_width > 0.0,
                Element::Freeform {
                    stroke_width, segments, ..
                } => *stroke_width > 0.0 && !segments.is_empty(),
                Element::Rectangle { width, height, .. } => *width > 0.0 && *height > 0.0,
                Element::Ellipse { rx, ry, .. } => *rx > 0.0 && *ry > 0.0,
                Element::RoundedRectangle {
                    width, height, radius, ..
                } => *width > 0.0 && *height > 0.0 && *radius >= 0.0 && 2.0 * radius <= width.min(*height),
            };
            if !ok {
                return Err(format!("element {i} ({}): invalid size", el.kind()));
            }
        }
        if self.sketch.iter().flatten().flatten().any(|v| !v.is_finite()) {
            return Err("sketch: non-finite coordinate".into());
        }
        Ok(())
    }
}

fn cubic(p0: Point, p1: Point, p2: Point, p3: Point, t: f64) -> Point {
    let s = 1.0 - t;
    let w = [s * s * s, 3.0 * s * s * t, 3.0 * s * t * t, t * t * t];
    [
        w[0] * p0[0] + w[1] * p1[0] + w[2] * p2[0] + w[3] * p3[0],
        w[0] * p0[1] + w[1] * p1[1] + w[2] * p2[1] + w[3] * p3[1],
    ]
}

/// Points along the circle through three points, or the chord when they
/// are collinear.
fn arc_points(a: Point, b: Point, m: Point) -> Vec<Point> {
    let d = 2.0 * (a[0] * (m[1] - b[1]) + m[0] * (b[1] - a[1]) + b[0] * (a[1] - m[1]));
    let chord = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
    if d.abs() <= 1e-12 * (1.0 + chord * chord) {
        return vec![a, b];
    }
    let sq = |p: Point| p[0] * p[0] + p[1] * p[1];
    let cx = (sq(a) * (m[1] - b[1]) + sq(m) * (b[1] - a[1]) + sq(b) * (a[1] - m[1])) / d;
    let cy = (sq(a) * (b[0] - m[0]) + sq(m) * (a[0] - b[0]) + sq(b) * (m[0] - a[0])) / d;
    let r = ((a[0] - cx).powi(2) + (a[1] - cy).powi(2)).sqrt();
    let ang = |p: Point| (p[1] - cy).atan2(p[0] - cx);
    let (t0, tm, t1) = (ang(a), ang(m), ang(b));
    let tau = std::f64::consts::TAU;
    let ccw = |from: f64, to: f64| (to - from).rem_euclid(tau);
    // Sweep the way that passes through the bulge point.
    let sweep = if ccw(t0, tm) <= ccw(t0, t1) {
        ccw(t0, t1)
    } else {
        ccw(t0, t1) - tau
    };
    let n = ((sweep.abs() * 16.0).ceil() as usize).max(4);
    (0..=n)
        .map(|k| {
            let t = t0 + sweep * k as f64 / n as f64;
            [cx + r * t.cos(), cy + r * t.sin()]
        })
        .collect()
}

/// Closed outline of a stroked polyline with square caps.
fn band(points: &[Point], width: f64) -> Vec<Point> {
    let mut pts: Vec<Point> = Vec::with_capacity(points.len());
    for &p in points {
        if pts
            .last()
            .is_none_or(|q: &Point| (q[0] - p[0]).hypot(q[1] - p[1]) > 1e-9)
        {
            pts.push(p);
        }
    }
    let h = width / 2.0;
    if pts.len() < 2 {
        let [x, y] = pts[0];
        return vec![[x - h, y - h], [x + h, y - h], [x + h, y + h], [x - h, y + h]];
    }
    let dir = |a: Point, b: Point| {
        let l = (b[0] - a[0]).hypot(b[1] - a[1]);
        [(b[0] - a[0]) / l, (b[1] - a[1]) / l]
    };
    let n = pts.len();
    let d0 = dir(pts[0], pts[1]);
    let d1 = dir(pts[n - 2], pts[n - 1]);
    pts[0] = [pts[0][0] - d0[0] * h, pts[0][1] - d0[1] * h];
    pts[n - 1] = [pts[n - 1][0] + d1[0] * h, pts[n - 1][1] + d1[1] * h];
    let mut left = Vec::with_capacity(n);
    let mut right = Vec::with_capacity(n);
    for i in 0..n {
        let incoming = (i > 0).then(|| dir(pts[i - 1], pts[i]));
        let outgoing = (i + 1 < n).then(|| dir(pts[i], pts[i + 1]));
        let (a, t) = match (incoming, outgoing) {
            (Some(a), Some(b)) => {
                let s = [a[0] + b[0], a[1] + b[1]];
                let l = s[0].hypot(s[1]);
                (a, if l > 1e-9 { [s[0] / l, s[1] / l] } else { a })
            }
            (Some(a), None) => (a, a),
            (None, Some(b)) => (b, b),
            (None, None) => unreachable!("at least two points"),
        };
        let normal = [-t[1], t[0]];
        // Miter length, capped so sharp turns stay bounded.
        let cos_half = (normal[0] * -a[1] + normal[1] * a[0]).max(0.25);
        let m = h / cos_half;
        left.push([pts[i][0] + normal[0] * m, pts[i][1] + normal[1] * m]);
        right.push([pts[i][0] - normal[0] * m, pts[i][1] - normal[1] * m]);
    }
    right.reverse();
    left.extend(right);
    left
}

fn path_data(poly: &[Point]) -> String {
    let mut d = String::new();
    for (i, p) in poly.iter().enumerate() {
        let _ = write!(d, "{}{} {} ", if i == 0 { "M" } else { "L" }, p[0], p[1]);
    }
    d.push('Z');
    d
}

fn paint(fill: &Option<Rgba>) -> String {
    match fill {
        Some(c) if c.a() == 255 => format!(r#"fill="{}""#, c.hex_rgb()),
        Some(c) => format!(r#"fill="{}" fill-opacity="{}""#, c.hex_rgb(), c.a() as f64 / 255.0),
        None => r#"fill="none""#.to_string(),
    }
}

/// SVG of the drawn layers. Every element becomes one closed shape so the
/// file re-imports as clipart with one path per element, in layer order.
pub fn export_svg(doc: &DrawingDoc) -> String {
    let mut out = format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {w} {h}" width="{w}" height="{h}">"#,
        w = doc.width,
        h = doc.height
    );
    out.push('\n');
    for (i, el) in doc.layers.iter().enumerate() {
        let body = match el {
            Element::Line {
                from,
                to,
                stroke,
                stroke_width,
            } => stroked(&band(&[*from, *to], *stroke_width), stroke),
            Element::Arc {
                start,
                end,
                bulge,
                stroke,
                stroke_width,
            } => stroked(&band(&arc_points(*start, *end, *bulge), *stroke_width), stroke),
            Element::Freeform {
                start,
                segments,
                stroke,
                stroke_width,
            } => {
                let mut pts = vec![*start];
                let mut from = *start;
                for [c1, c2, to] in segments {
                    pts.extend((1..=16).map(|k| cubic(from, *c1, *c2, *to, k as f64 / 16.0)));
                    from = *to;
                }
                stroked(&band(&pts, *stroke_width), stroke)
            }
            Element::Rectangle {
                x,
                y,
                width,
                height,
                fill,
            } => {
                format!(
                    r#"<rect x="{x}" y="{y}" width="{width}" height="{height}" {}"#,
                    paint(fill)
                )
            }
            Element::Ellipse { cx, cy, rx, ry, fill } => {
                format!(r#"<ellipse cx="{cx}" cy="{cy}" rx="{rx}" ry="{ry}" {}"#, paint(fill))
            }
            Element::RoundedRectangle {
                x,
                y,
                width,
                height,
                radius,
                fill,
            } => format!(
                r#"<rect x="{x}" y="{y}" width="{width}" height="{height}" rx="{radius}" ry="{radius}" {}"#,
                paint(fill)
            ),
        };
        let _ = writeln!(out, r#"  {body} data-layer="{i}" data-tool="{}"/>"#, el.kind());
    }
    out.push_str("</svg>\n");
    out
}

fn stroked(poly: &[Point], stroke: &Rgba) -> String {
    format!(r#"<path d="{}" {}"#, path_data(poly), paint(&Some(*stroke)))
}
