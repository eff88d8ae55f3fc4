//! SVG-subset ingest: document walking, path-data decoding, curve flattening,
//! normalization into the unit frame, and serialization back to SVG.
//!
//! Supported: `<path>` (M/L/H/V/C/A/Z, absolute and relative), `<rect>` (with
//! optional rounded corners), `<circle>`, `<ellipse>`, and `<g>` with affine
//! transforms and inherited fills. `<title>`, `<desc>` and `<metadata>` are
//! ignored; any other element is a parse error.

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;
use std::str::FromStr;

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::geom::{Bounds2, Vec2};
use crate::model::{geometry_paths, Clipart, ClosedPath, PathKind, Rgba, Viewpoint};

pub const DEFAULT_TOLERANCE: f64 = 1e-3;

const SVG_NS: &str = "http://www.w3.org/2000/svg";

/// 2-D affine map `(x, y) -> (a x + c y + e, b x + d y + f)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub f: f64,
}

impl Affine {
    pub const IDENTITY: Affine = Affine {
        a: 1.0,
        b: 0.0,
        c: 0.0,
        d: 1.0,
        e: 0.0,
        f: 0.0,
    };

    pub fn apply(&self, p: Vec2) -> Vec2 {
        Vec2::new(
            self.a * p.x + self.c * p.y + self.e,
            self.b * p.x + self.d * p.y + self.f,
        )
    }

    pub fn linear(&self) -> Matrix2<f64> {
        Matrix2::new(self.a, self.c, self.b, self.d)
    }

    /// `self ∘ inner`: apply `inner` first.
    pub fn then_inner(&self, inner: &Affine) -> Affine {
        Affine {
            a: self.a * inner.a + self.c * inner.b,
            b: self.b * inner.a + self.d * inner.b,
            c: self.a * inner.c + self.c * inner.d,
            d: self.b * inner.c + self.d * inner.d,
            e: self.a * inner.e + self.c * inner.f + self.e,
            f: self.b * inner.e + self.d * inner.f + self.f,
        }
    }
}

/// Elliptical arc in center form: `point(t) = center + axes * (cos t, sin t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArcSegment {
    pub center: Vec2,
    pub axes: Matrix2<f64>,
    pub start_angle: f64,
    pub sweep: f64,
    /// Exact end point, kept so flattening closes onto it without drift.
    pub end: Vec2,
}

impl ArcSegment {
    pub fn point_at(&self, t: f64) -> Vec2 {
        self.center + self.axes * Vector2::new(t.cos(), t.sin())
    }

    fn transformed(&self, tf: &Affine) -> ArcSegment {
        ArcSegment {
            center: tf.apply(self.center),
            axes: tf.linear() * self.axes,
            start_angle: self.start_angle,
            sweep: self.sweep,
            end: tf.apply(self.end),
        }
    }

    /// Largest singular value of the axes matrix: the arc's maximum radius.
    pub fn max_radius(&self) -> f64 {
        spectral_norm(&self.axes)
    }
}

fn spectral_norm(m: &Matrix2<f64>) -> f64 {
    let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let s = a * a + b * b + c * c + d * d;
    let det = a * d - b * c;
    let disc = (s * s - 4.0 * det * det).max(0.0).sqrt();
    (0.5 * (s + disc)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Segment {
    Move(Vec2),
    Line(Vec2),
    Cubic(Vec2, Vec2, Vec2),
    Arc(ArcSegment),
    Close,
}

/// One closed subpath of a document, in document units with transforms applied.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSpec {
    pub segments: Vec<Segment>,
    pub fill: Rgba,
    pub kind: PathKind,
    pub document_index: usize,
    /// Human-readable element locus for error messages.
    pub element: String,
}

impl PathSpec {
    /// Absolute path data (`M/L/C/A/Z`) reproducing this subpath.
    pub fn to_path_data(&self) -> String {
        let mut out = String::new();
        let mut cur = Vec2::origin();
        for seg in &self.segments {
            match seg {
                Segment::Move(p) => {
                    let _ = write!(out, "M{} {} ", p.x, p.y);
                    cur = *p;
                }
                Segment::Line(p) => {
                    let _ = write!(out, "L{} {} ", p.x, p.y);
                    cur = *p;
                }
                Segment::Cubic(c1, c2, p) => {
                    let _ = write!(out, "C{} {} {} {} {} {} ", c1.x, c1.y, c2.x, c2.y, p.x, p.y);
                    cur = *p;
                }
                Segment::Arc(arc) => {
                    write_arc(&mut out, arc, cur);
                    cur = arc.end;
                }
                Segment::Close => out.push('Z'),
            }
        }
        out.trim_end().to_string()
    }

    /// Every segment's end point and control points, for extent estimates.
    fn control_bounds(&self) -> Bounds2 {
        let mut b = Bounds2::empty();
        for seg in &self.segments {
            match seg {
                Segment::Move(p) | Segment::Line(p) => b.include(p),
                Segment::Cubic(c1, c2, p) => {
                    b.include(c1);
                    b.include(c2);
                    b.include(p);
                }
                Segment::Arc(arc) => {
                    let r = arc.max_radius();
                    b.include(&Vec2::new(arc.center.x - r, arc.center.y - r));
                    b.include(&Vec2::new(arc.center.x + r, arc.center.y + r));
                }
                Segment::Close => {}
            }
        }
        b
    }
}

/// Writes an arc as one or two SVG `A` commands (a full turn needs two).
fn write_arc(out: &mut String, arc: &ArcSegment, _from: Vec2) {
    // Decompose axes = U * diag(rx, ry) * V^T.
    let svd = arc.axes.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let (rx, ry) = (svd.singular_values[0], svd.singular_values[1]);
    let rot = u[(1, 0)].atan2(u[(0, 0)]).to_degrees();
    let orientation = (u.determinant() * vt.determinant()).signum();
    let pieces = if arc.sweep.abs() > PI + 1e-12 { 2 } else { 1 };
    for k in 1..=pieces {
        let t = arc.start_angle + arc.sweep * k as f64 / pieces as f64;
        let p = if k == pieces { arc.end } else { arc.point_at(t) };
        let piece_sweep = arc.sweep / pieces as f64;
        let large = u8::from(piece_sweep.abs() > PI);
        let sweep_flag = u8::from(piece_sweep * orientation > 0.0);
        let _ = write!(out, "A{} {} {} {} {} {} {} ", rx, ry, rot, large, sweep_flag, p.x, p.y);
    }
}

fn arc_from_endpoints(
    from: Vec2,
    to: Vec2,
    rx: f64,
    ry: f64,
    rotation_deg: f64,
    large_arc: bool,
    sweep: bool,
) -> Option<ArcSegment> {
    if from == to {
        return None;
    }
    let (mut rx, mut ry) = (rx.abs(), ry.abs());
    if rx == 0.0 || ry == 0.0 {
        return None;
    }
    let phi = rotation_deg.to_radians();
    let (sp, cp) = phi.sin_cos();
    let dx = 0.5 * (from.x - to.x);
    let dy = 0.5 * (from.y - to.y);
    let x1 = cp * dx + sp * dy;
    let y1 = -sp * dx + cp * dy;
    let lambda = (x1 * x1) / (rx * rx) + (y1 * y1) / (ry * ry);
    if lambda > 1.0 {
        let s = lambda.sqrt();
        rx *= s;
        ry *= s;
    }
    let num = rx * rx * ry * ry - rx * rx * y1 * y1 - ry * ry * x1 * x1;
    let den = rx * rx * y1 * y1 + ry * ry * x1 * x1;
    let mut coef = (num / den).max(0.0).sqrt();
    if large_arc == sweep {
        coef = -coef;
    }
    let cxp = coef * rx * y1 / ry;
    let cyp = -coef * ry * x1 / rx;
    let center = Vec2::new(
        cp * cxp - sp * cyp + 0.5 * (from.x + to.x),
        sp * cxp + cp * cyp + 0.5 * (from.y + to.y),
    );
    let angle = |ux: f64, uy: f64, vx: f64, vy: f64| {
        let dot = ux * vx + uy * vy;
        let det = ux * vy - uy * vx;
        det.atan2(dot)
    };
    let ux = (x1 - cxp) / rx;
    let uy = (y1 - cyp) / ry;
    let vx = (-x1 - cxp) / rx;
    let vy = (-y1 - cyp) / ry;
    let start = angle(1.0, 0.0, ux, uy);
    let mut delta = angle(ux, uy, vx, vy);
    if !sweep && delta > 0.0 {
        delta -= TAU;
    } else if sweep && delta < 0.0 {
        delta += TAU;
    }
    let axes = Matrix2::new(cp * rx, -sp * ry, sp * rx, cp * ry);
    Some(ArcSegment {
        center,
        axes,
        start_angle: start,
        sweep: delta,
        end: to,
    })
}

fn cubic_point(p0: Vec2, p1: Vec2, p2: Vec2, p3: Vec2, t: f64) -> Vec2 {
    let mt = 1.0 - t;
    let a = mt * mt * mt;
    let b = 3.0 * mt * mt * t;
    let c = 3.0 * mt * t * t;
    let d = t * t * t;
    Vec2::new(
        a * p0.x + b * p1.x + c * p2.x + d * p3.x,
        a * p0.y + b * p1.y + c * p2.y + d * p3.y,
    )
}

/// Uniform subdivision count keeping chord deviation within `tol`.
///
/// For a C² curve sampled at parameter step h the chord error is at most
/// `h² max|c''| / 8`.
fn cubic_steps(p0: Vec2, p1: Vec2, p2: Vec2, p3: Vec2, tol: f64) -> usize {
    let dd1 = (p0 - 2.0 * p1.coords + p2.coords).coords.norm();
    let dd2 = (p1 - 2.0 * p2.coords + p3.coords).coords.norm();
    let bound = 6.0 * dd1.max(dd2);
    ((bound / (8.0 * tol)).sqrt().ceil() as usize).max(1)
}

fn arc_steps(arc: &ArcSegment, tol: f64) -> usize {
    let n = arc.sweep.abs() * (arc.max_radius() / (8.0 * tol)).sqrt();
    (n.ceil() as usize).max(1)
}

fn remove_redundant(mut pts: Vec<Vec2>) -> Vec<Vec2> {
    let same = |a: &Vec2, b: &Vec2| (a - b).norm() <= 1e-12 * (1.0 + a.coords.norm());
    pts.dedup_by(|b, a| same(a, b));
    while pts.len() > 1 && same(&pts[0], pts.last().unwrap()) {
        pts.pop();
    }
    loop {
        let n = pts.len();
        if n < 3 {
            return pts;
        }
        let mut removed = false;
        let mut i = 0;
        while i < pts.len() && pts.len() >= 3 {
            let m = pts.len();
            let a = pts[(i + m - 1) % m];
            let b = pts[i];
            let c = pts[(i + 1) % m];
            let ab = b - a;
            let bc = c - b;
            let cross = ab.x * bc.y - ab.y * bc.x;
            let scale = (c - a).norm_squared();
            if cross.abs() <= 1e-12 * scale && ab.dot(&bc) > 0.0 {
                pts.remove(i);
                removed = true;
            } else {
                i += 1;
            }
        }
        if !removed {
            return pts;
        }
    }
}

/// Polyline approximation of a closed subpath whose deviation from every curved
/// segment is at most `tolerance`; straight segments pass through unchanged and
/// collinear neighbours are merged.
pub fn flatten_path(spec: &PathSpec, tolerance: f64) -> Result<Vec<Vec2>> {
    if !(tolerance > 0.0) {
        return Err(Error::Config(format!("tolerance must be positive, got {tolerance}")));
    }
    let mut pts = Vec::new();
    let mut cur = Vec2::origin();
    for seg in &spec.segments {
        match *seg {
            Segment::Move(p) => {
                pts.push(p);
                cur = p;
            }
            Segment::Line(p) => {
                pts.push(p);
                cur = p;
            }
            Segment::Cubic(c1, c2, p) => {
                let n = cubic_steps(cur, c1, c2, p, tolerance);
                for k in 1..n {
                    pts.push(cubic_point(cur, c1, c2, p, k as f64 / n as f64));
                }
                pts.push(p);
                cur = p;
            }
            Segment::Arc(arc) => {
                let n = arc_steps(&arc, tolerance);
                for k in 1..n {
                    pts.push(arc.point_at(arc.start_angle + arc.sweep * k as f64 / n as f64));
                }
                pts.push(arc.end);
                cur = arc.end;
            }
            Segment::Close => {}
        }
    }
    let pts = remove_redundant(pts);
    if pts.len() < 3 {
        return Err(Error::Degenerate(format!(
            "{} flattens to {} distinct vertices",
            spec.element,
            pts.len()
        )));
    }
    Ok(pts)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IngestOptions {
    /// Flattening tolerance in normalized units.
    pub tolerance: f64,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            tolerance: DEFAULT_TOLERANCE,
        }
    }
}

#[derive(Clone)]
struct Style {
    transform: Affine,
    fill: Rgba,
    kind: PathKind,
}

fn locus(node: &roxmltree::Node, doc: &roxmltree::Document) -> String {
    let pos = doc.text_pos_at(node.range().start);
    match node.attribute("id") {
        Some(id) => format!("<{} id=\"{}\"> at {}:{}", node.tag_name().name(), id, pos.row, pos.col),
        None => format!("<{}> at {}:{}", node.tag_name().name(), pos.row, pos.col),
    }
}

fn style_property<'a>(node: &'a roxmltree::Node, name: &str) -> Option<&'a str> {
    let from_style = node.attribute("style").and_then(|style| {
        style.split(';').find_map(|decl| {
            let (k, v) = decl.split_once(':')?;
            (k.trim() == name).then(|| v.trim())
        })
    });
    from_style.or_else(|| node.attribute(name).map(str::trim))
}

fn parse_opacity(text: &str, at: &str) -> Result<f64> {
    text.parse::<f64>()
        .map(|v| v.clamp(0.0, 1.0))
        .map_err(|_| Error::parse(at, format!("bad opacity {text:?}")))
}

fn resolve_style(node: &roxmltree::Node, parent: &Style, at: &str) -> Result<Style> {
    let mut style = parent.clone();
    if let Some(tf) = node.attribute("transform") {
        let t = svgtypes::Transform::from_str(tf).map_err(|e| Error::parse(at, format!("bad transform: {e}")))?;
        let local = Affine {
            a: t.a,
            b: t.b,
            c: t.c,
            d: t.d,
            e: t.e,
            f: t.f,
        };
        style.transform = parent.transform.then_inner(&local);
    }
    if let Some(fill) = style_property(node, "fill") {
        style.fill = match svgtypes::Paint::from_str(fill) {
            Ok(svgtypes::Paint::None) => Rgba::TRANSPARENT,
            Ok(svgtypes::Paint::Inherit) => parent.fill,
            Ok(svgtypes::Paint::Color(c)) => Rgba([c.red, c.green, c.blue, c.alpha]),
            Ok(_) => return Err(Error::parse(at, format!("unsupported paint {fill:?}"))),
            Err(e) => return Err(Error::parse(at, format!("bad fill {fill:?}: {e}"))),
        };
    }
    let mut alpha = 1.0;
    if let Some(op) = style_property(node, "fill-opacity") {
        alpha *= parse_opacity(op, at)?;
    }
    if let Some(op) = style_property(node, "opacity") {
        alpha *= parse_opacity(op, at)?;
    }
    if alpha < 1.0 {
        let a = (style.fill.a() as f64 * alpha).round() as u8;
        style.fill = Rgba([style.fill.r(), style.fill.g(), style.fill.b(), a]);
    }
    if let Some(kind) = node.attribute("data-kind") {
        style.kind = kind
            .parse()
            .map_err(|_| Error::parse(at, format!("bad data-kind {kind:?}")))?;
    }
    Ok(style)
}

fn length_attr(node: &roxmltree::Node, name: &str, at: &str) -> Result<Option<f64>> {
    let Some(text) = node.attribute(name) else {
        return Ok(None);
    };
    let len = svgtypes::Length::from_str(text).map_err(|e| Error::parse(at, format!("bad {name} {text:?}: {e}")))?;
    match len.unit {
        svgtypes::LengthUnit::None | svgtypes::LengthUnit::Px => Ok(Some(len.number)),
        _ => Err(Error::parse(at, format!("unsupported unit in {name}={text:?}"))),
    }
}

fn required(node: &roxmltree::Node, name: &str, at: &str) -> Result<f64> {
    length_attr(node, name, at)?.ok_or_else(|| Error::parse(at, format!("missing {name}")))
}

fn ellipse_segments(cx: f64, cy: f64, rx: f64, ry: f64) -> Vec<Segment> {
    let arc = ArcSegment {
        center: Vec2::new(cx, cy),
        axes: Matrix2::new(rx, 0.0, 0.0, ry),
        start_angle: 0.0,
        sweep: TAU,
        end: Vec2::new(cx + rx, cy),
    };
    vec![Segment::Move(arc.end), Segment::Arc(arc), Segment::Close]
}

fn corner(cx: f64, cy: f64, rx: f64, ry: f64, start: f64) -> Segment {
    let arc = ArcSegment {
        center: Vec2::new(cx, cy),
        axes: Matrix2::new(rx, 0.0, 0.0, ry),
        start_angle: start,
        sweep: 0.5 * PI,
        end: Vec2::origin(),
    };
    let end = arc.point_at(start + 0.5 * PI);
    Segment::Arc(ArcSegment { end, ..arc })
}

fn rect_segments(x: f64, y: f64, w: f64, h: f64, rx: f64, ry: f64) -> Vec<Segment> {
    if rx <= 0.0 || ry <= 0.0 {
        return vec![
            Segment::Move(Vec2::new(x, y)),
            Segment::Line(Vec2::new(x + w, y)),
            Segment::Line(Vec2::new(x + w, y + h)),
            Segment::Line(Vec2::new(x, y + h)),
            Segment::Close,
        ];
    }
    vec![
        Segment::Move(Vec2::new(x + rx, y)),
        Segment::Line(Vec2::new(x + w - rx, y)),
        corner(x + w - rx, y + ry, rx, ry, -0.5 * PI),
        Segment::Line(Vec2::new(x + w, y + h - ry)),
        corner(x + w - rx, y + h - ry, rx, ry, 0.0),
        Segment::Line(Vec2::new(x + rx, y + h)),
        corner(x + rx, y + h - ry, rx, ry, 0.5 * PI),
        Segment::Line(Vec2::new(x, y + ry)),
        corner(x + rx, y + ry, rx, ry, PI),
        Segment::Close,
    ]
}

/// Splits path data into closed subpaths of absolute segments (untransformed).
fn decode_path_data(d: &str, at: &str) -> Result<Vec<Vec<Segment>>> {
    use svgtypes::PathSegment as S;
    let mut subpaths = Vec::new();
    let mut current: Vec<Segment> = Vec::new();
    let mut cur = Vec2::origin();
    let mut start = Vec2::origin();
    let mut drawn = false;
    let open_err = || Error::parse(at, "open subpath: every subpath must end with Z");
    for seg in svgtypes::PathParser::from(d) {
        let seg = seg.map_err(|e| Error::parse(at, format!("bad path data: {e}")))?;
        let rel = |abs: bool, x: f64, y: f64, cur: Vec2| {
            if abs {
                Vec2::new(x, y)
            } else {
                Vec2::new(cur.x + x, cur.y + y)
            }
        };
        // A drawing command right after Z continues from the subpath start.
        let begin = |current: &mut Vec<Segment>, cur: Vec2| {
            if current.is_empty() {
                current.push(Segment::Move(cur));
            }
        };
        match seg {
            S::MoveTo { abs, x, y } => {
                if drawn {
                    return Err(open_err());
                }
                cur = rel(abs, x, y, cur);
                start = cur;
                current = vec![Segment::Move(cur)];
            }
            S::LineTo { abs, x, y } => {
                begin(&mut current, cur);
                cur = rel(abs, x, y, cur);
                current.push(Segment::Line(cur));
                drawn = true;
            }
            S::HorizontalLineTo { abs, x } => {
                begin(&mut current, cur);
                cur = Vec2::new(if abs { x } else { cur.x + x }, cur.y);
                current.push(Segment::Line(cur));
                drawn = true;
            }
            S::VerticalLineTo { abs, y } => {
                begin(&mut current, cur);
                cur = Vec2::new(cur.x, if abs { y } else { cur.y + y });
                current.push(Segment::Line(cur));
                drawn = true;
            }
            S::CurveTo {
                abs,
                x1,
                y1,
                x2,
                y2,
                x,
                y,
            } => {
                begin(&mut current, cur);
                let c1 = rel(abs, x1, y1, cur);
                let c2 = rel(abs, x2, y2, cur);
                cur = rel(abs, x, y, cur);
                current.push(Segment::Cubic(c1, c2, cur));
                drawn = true;
            }
            S::EllipticalArc {
                abs,
                rx,
                ry,
                x_axis_rotation,
                large_arc,
                sweep,
                x,
                y,
            } => {
                begin(&mut current, cur);
                let to = rel(abs, x, y, cur);
                match arc_from_endpoints(cur, to, rx, ry, x_axis_rotation, large_arc, sweep) {
                    Some(arc) => current.push(Segment::Arc(arc)),
                    None if cur != to => current.push(Segment::Line(to)),
                    None => {}
                }
                cur = to;
                drawn = true;
            }
            S::ClosePath { .. } => {
                if drawn {
                    current.push(Segment::Close);
                    subpaths.push(std::mem::take(&mut current));
                }
                current.clear();
                drawn = false;
                cur = start;
            }
            other => return Err(Error::parse(at, format!("unsupported path command {other:?}"))),
        }
    }
    if drawn {
        return Err(open_err());
    }
    Ok(subpaths)
}

fn transform_segments(segs: Vec<Segment>, tf: &Affine) -> Vec<Segment> {
    segs.into_iter()
        .map(|s| match s {
            Segment::Move(p) => Segment::Move(tf.apply(p)),
            Segment::Line(p) => Segment::Line(tf.apply(p)),
            Segment::Cubic(a, b, p) => Segment::Cubic(tf.apply(a), tf.apply(b), tf.apply(p)),
            Segment::Arc(arc) => Segment::Arc(arc.transformed(tf)),
            Segment::Close => Segment::Close,
        })
        .collect()
}

fn is_svg(node: &roxmltree::Node) -> bool {
    matches!(node.tag_name().namespace(), None | Some(SVG_NS))
}

fn walk(node: roxmltree::Node, doc: &roxmltree::Document, parent: &Style, out: &mut Vec<PathSpec>) -> Result<()> {
    for child in node.children().filter(|n| n.is_element()) {
        let at = locus(&child, doc);
        let name = child.tag_name().name();
        if !is_svg(&child) {
            return Err(Error::parse(at, "element outside the SVG namespace"));
        }
        if matches!(name, "title" | "desc" | "metadata") {
            continue;
        }
        let style = resolve_style(&child, parent, &at)?;
        let segments: Vec<Vec<Segment>> = match name {
            "g" => {
                walk(child, doc, &style, out)?;
                continue;
            }
            "path" => {
                let d = child
                    .attribute("d")
                    .ok_or_else(|| Error::parse(&at, "path without d"))?;
                decode_path_data(d, &at)?
            }
            "rect" => {
                let x = length_attr(&child, "x", &at)?.unwrap_or(0.0);
                let y = length_attr(&child, "y", &at)?.unwrap_or(0.0);
                let w = required(&child, "width", &at)?;
                let h = required(&child, "height", &at)?;
                if w <= 0.0 || h <= 0.0 {
                    return Err(Error::parse(at, "rect with non-positive size"));
                }
                let rx = length_attr(&child, "rx", &at)?;
                let ry = length_attr(&child, "ry", &at)?;
                let (rx, ry) = match (rx, ry) {
                    (Some(a), Some(b)) => (a, b),
                    (Some(a), None) | (None, Some(a)) => (a, a),
                    (None, None) => (0.0, 0.0),
                };
                vec![rect_segments(x, y, w, h, rx.min(0.5 * w), ry.min(0.5 * h))]
            }
            "circle" => {
                let cx = length_attr(&child, "cx", &at)?.unwrap_or(0.0);
                let cy = length_attr(&child, "cy", &at)?.unwrap_or(0.0);
                let r = required(&child, "r", &at)?;
                if r <= 0.0 {
                    return Err(Error::parse(at, "circle with non-positive radius"));
                }
                vec![ellipse_segments(cx, cy, r, r)]
            }
            "ellipse" => {
                let cx = length_attr(&child, "cx", &at)?.unwrap_or(0.0);
                let cy = length_attr(&child, "cy", &at)?.unwrap_or(0.0);
                let rx = required(&child, "rx", &at)?;
                let ry = required(&child, "ry", &at)?;
                if rx <= 0.0 || ry <= 0.0 {
                    return Err(Error::parse(at, "ellipse with non-positive radius"));
                }
                vec![ellipse_segments(cx, cy, rx, ry)]
            }
            other => return Err(Error::parse(at, format!("unsupported element <{other}>"))),
        };
        let multi = segments.len() > 1;
        for (k, segs) in segments.into_iter().enumerate() {
            out.push(PathSpec {
                segments: transform_segments(segs, &style.transform),
                fill: style.fill,
                kind: style.kind,
                document_index: out.len(),
                element: if multi { format!("{at} subpath {k}") } else { at.clone() },
            });
        }
    }
    Ok(())
}

/// Decodes every closed subpath of a document, in paint order.
pub fn parse_path_specs(document: &[u8]) -> Result<Vec<PathSpec>> {
    let text = std::str::from_utf8(document).map_err(|e| Error::parse("document", format!("not UTF-8: {e}")))?;
    let doc = roxmltree::Document::parse(text).map_err(|e| Error::parse("document", format!("malformed XML: {e}")))?;
    let root = doc.root_element();
    if root.tag_name().name() != "svg" || !is_svg(&root) {
        return Err(Error::parse(locus(&root, &doc), "root element must be <svg>"));
    }
    let base = Style {
        transform: Affine::IDENTITY,
        fill: Rgba::BLACK,
        kind: PathKind::Geometry,
    };
    let root_style = resolve_style(&root, &base, "<svg>")?;
    let mut out = Vec::new();
    walk(root, &doc, &root_style, &mut out)?;
    if out.is_empty() {
        return Err(Error::EmptyDocument);
    }
    Ok(out)
}

/// Uniform scale and shift taking `bbox` to a centered fit in the unit square,
/// flipping y so it points up.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    pub scale: f64,
    pub bbox: Bounds2,
}

impl Normalization {
    pub fn fit(bbox: Bounds2) -> Result<Normalization> {
        let extent = bbox.width().max(bbox.height());
        if bbox.is_empty() || !(extent > 0.0) || !extent.is_finite() {
            return Err(Error::Degenerate("document has zero extent".into()));
        }
        Ok(Normalization {
            scale: 1.0 / extent,
            bbox,
        })
    }

    pub fn apply(&self, p: Vec2) -> Vec2 {
        let s = self.scale;
        let ox = 0.5 * (1.0 - self.bbox.width() * s);
        let oy = 0.5 * (1.0 - self.bbox.height() * s);
        Vec2::new((p.x - self.bbox.min.x) * s + ox, (self.bbox.max.y - p.y) * s + oy)
    }
}

pub fn parse_clipart(document: &[u8]) -> Result<Clipart> {
    parse_clipart_with(document, &IngestOptions::default())
}

pub fn parse_clipart_with(document: &[u8], options: &IngestOptions) -> Result<Clipart> {
    let specs = parse_path_specs(document)?;
    let rough = specs.iter().fold(Bounds2::empty(), |b, s| b.union(&s.control_bounds()));
    let rough_extent = rough.width().max(rough.height());
    if !(rough_extent > 0.0) {
        return Err(Error::Degenerate("document has zero extent".into()));
    }

    // First pass only estimates the true extent so the second pass can flatten
    // with the tolerance expressed in normalized units.
    let coarse_tol = 1e-3 * rough_extent;
    let mut coarse = Bounds2::empty();
    for spec in &specs {
        coarse = coarse.union(&Bounds2::of(&flatten_path(spec, coarse_tol)?));
    }
    let doc_tol = 0.5 * options.tolerance * coarse.width().max(coarse.height());

    let polygons = specs
        .iter()
        .map(|s| flatten_path(s, doc_tol))
        .collect::<Result<Vec<_>>>()?;
    let bbox = polygons.iter().fold(Bounds2::empty(), |b, p| b.union(&Bounds2::of(p)));
    let norm = Normalization::fit(bbox)?;

    let paths = specs
        .iter()
        .zip(polygons)
        .enumerate()
        .map(|(i, (spec, poly))| ClosedPath {
            id: i,
            polygon: poly.into_iter().map(|p| norm.apply(p)).collect(),
            fill: spec.fill,
            layer: i,
            kind: spec.kind,
            source: spec.to_path_data(),
        })
        .collect();
    Ok(Clipart {
        paths,
        input_view: Viewpoint::FRONT,
        bbox,
    })
}

fn polygon_data(poly: &[Vec2]) -> String {
    let mut d = String::new();
    for (i, p) in poly.iter().enumerate() {
        let _ = write!(d, "{}{} {} ", if i == 0 { "M" } else { "L" }, p.x, 1.0 - p.y);
    }
    d.push('Z');
    d
}

fn svg_header(out: &mut String) {
    out.push_str("<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 1 1\" width=\"512\" height=\"512\">\n");
}

/// Serializes the clipart (all paths, paint order) in the normalized frame.
/// Re-parsing reproduces paths, layers, fills, kinds and vertices.
pub fn to_svg(clipart: &Clipart) -> String {
    let mut paths: Vec<&ClosedPath> = clipart.paths.iter().collect();
    paths.sort_by_key(|p| (p.layer, p.id));
    let mut out = String::new();
    svg_header(&mut out);
    for p in paths {
        let _ = write!(
            out,
            "  <path id=\"p{}\" d=\"{}\" fill=\"{}\"",
            p.id,
            polygon_data(&p.polygon),
            p.fill.hex_rgb()
        );
        if p.fill.a() != 255 {
            let _ = write!(out, " fill-opacity=\"{}\"", p.fill.a() as f64 / 255.0);
        }
        if p.kind == PathKind::Shading {
            out.push_str(" data-kind=\"shading\"");
        }
        out.push_str("/>\n");
    }
    out.push_str("</svg>\n");
    out
}

/// Outline-only document of the geometry paths: unfilled, thin black strokes.
pub fn strip_fills(clipart: &Clipart) -> Result<String> {
    let mut paths = geometry_paths(clipart);
    if paths.is_empty() {
        return Err(Error::EmptyDocument);
    }
    paths.sort_by_key(|p| (p.layer, p.id));
    let mut out = String::new();
    svg_header(&mut out);
    for p in paths {
        let _ = writeln!(
            out,
            "  <path id=\"p{}\" d=\"{}\" fill=\"none\" stroke=\"#000000\" stroke-width=\"0.003\"/>",
            p.id,
            polygon_data(&p.polygon)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom;

    fn svg(body: &str) -> Vec<u8> {
        format!("<svg xmlns=\"http://www.w3.org/2000/svg\">{body}</svg>").into_bytes()
    }

    fn spec_of(segments: Vec<Segment>) -> PathSpec {
        PathSpec {
            segments,
            fill: Rgba::BLACK,
            kind: PathKind::Geometry,
            document_index: 0,
            element: "test".into(),
        }
    }

    #[test]
    fn two_rect_paths_get_layers_in_paint_order() {
        let c = parse_clipart(&svg(r##"<path d="M0 0 H10 V10 H0 Z" fill="#ff0000"/>
                <path d="M5 5 L15 5 L15 15 L5 15 Z" fill="blue"/>"##))
        .unwrap();
        assert_eq!(c.paths.len(), 2);
        assert_eq!(c.paths[0].layer, 0);
        assert_eq!(c.paths[1].layer, 1);
        assert_eq!(c.paths[0].fill, Rgba([255, 0, 0, 255]));
        assert_eq!(c.paths[1].fill, Rgba([0, 0, 255, 255]));
    }

    #[test]
    fn open_path_names_element() {
        let err = parse_clipart(&svg(r#"<path id="leg" d="M0 0 L1 0 L1 1"/>"#)).unwrap_err();
        match err {
            Error::Parse { locus, .. } => assert!(locus.contains("leg"), "{locus}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn aspect_two_to_one_normalizes() {
        let c = parse_clipart(&svg(r#"<rect x="3" y="7" width="40" height="20"/>"#)).unwrap();
        let b = Bounds2::of(&c.paths[0].polygon);
        assert!((b.width() - 1.0).abs() < 1e-12);
        assert!((b.height() - 0.5).abs() < 1e-12);
        assert!((b.min.y - 0.25).abs() < 1e-12);
        assert_eq!(c.bbox.min, Vec2::new(3.0, 7.0));
    }

    #[test]
    fn y_axis_points_up_after_normalization() {
        // Small box near the top of the document lands near y = 1.
        let c = parse_clipart(&svg(
            r#"<rect x="0" y="0" width="10" height="10"/><rect x="0" y="0" width="1" height="1"/>"#,
        ))
        .unwrap();
        let small = Bounds2::of(&c.paths[1].polygon);
        assert!((small.max.y - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unsupported_element_and_command_are_errors() {
        assert!(matches!(
            parse_clipart(&svg(r#"<text>hi</text>"#)),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            parse_clipart(&svg(r#"<path d="M0 0 Q1 1 2 0 Z"/>"#)),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            parse_clipart(b"<svg xmlns=\"http://www.w3.org/2000/svg\"><path"),
            Err(Error::Parse { .. })
        ));
        assert_eq!(parse_clipart(&svg("<title>empty</title>")), Err(Error::EmptyDocument));
    }

    #[test]
    fn multi_subpath_element_splits() {
        let c = parse_clipart(&svg(r#"<path d="M0 0 h1 v1 h-1 z m3 0 h1 v1 h-1 z"/>"#)).unwrap();
        assert_eq!(c.paths.len(), 2);
    }

    #[test]
    fn rectangle_flattens_to_corners() {
        let spec = spec_of(vec![
            Segment::Move(Vec2::new(0.0, 0.0)),
            Segment::Line(Vec2::new(2.0, 0.0)),
            Segment::Line(Vec2::new(2.0, 1.0)),
            Segment::Line(Vec2::new(0.0, 1.0)),
            Segment::Close,
        ]);
        let poly = flatten_path(&spec, 1e-3).unwrap();
        assert_eq!(
            poly,
            vec![
                Vec2::new(0.0, 0.0),
                Vec2::new(2.0, 0.0),
                Vec2::new(2.0, 1.0),
                Vec2::new(0.0, 1.0)
            ]
        );
    }

    #[test]
    fn collinear_vertices_merge() {
        let spec = spec_of(vec![
            Segment::Move(Vec2::new(0.0, 0.0)),
            Segment::Line(Vec2::new(1.0, 0.0)),
            Segment::Line(Vec2::new(2.0, 0.0)),
            Segment::Line(Vec2::new(2.0, 1.0)),
            Segment::Line(Vec2::new(0.0, 1.0)),
            Segment::Line(Vec2::new(0.0, 0.0)),
            Segment::Close,
        ]);
        assert_eq!(flatten_path(&spec, 1e-3).unwrap().len(), 4);
    }

    #[test]
    fn degenerate_flattening_errors() {
        let spec = spec_of(vec![
            Segment::Move(Vec2::new(0.0, 0.0)),
            Segment::Line(Vec2::new(1.0, 0.0)),
            Segment::Close,
        ]);
        assert!(matches!(flatten_path(&spec, 1e-3), Err(Error::Degenerate(_))));
        assert!(flatten_path(&spec, 0.0).is_err());
    }

    /// Max distance from dense samples of a segment to the polyline.
    fn sampled_deviation(curve: impl Fn(f64) -> Vec2, poly: &[Vec2]) -> f64 {
        (0..=4000)
            .map(|k| {
                let p = curve(k as f64 / 4000.0);
                let n = poly.len();
                (0..n)
                    .map(|i| geom::point_segment_distance(&p, &poly[i], &poly[(i + 1) % n]))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn circle_flattening_within_tolerance() {
        let tol = 1e-3;
        let spec = spec_of(ellipse_segments(0.5, 0.5, 0.5, 0.5));
        let poly = flatten_path(&spec, tol).unwrap();
        for p in &poly {
            let r = (p - Vec2::new(0.5, 0.5)).norm();
            assert!((r - 0.5).abs() <= tol);
        }
        let dev = sampled_deviation(
            |t| Vec2::new(0.5 + 0.5 * (TAU * t).cos(), 0.5 + 0.5 * (TAU * t).sin()),
            &poly,
        );
        assert!(dev <= tol, "sagitta {dev}");
    }

    #[test]
    fn cubic_flattening_within_tolerance_and_monotone() {
        let (p0, c1, c2, p3) = (
            Vec2::new(0.0, 0.0),
            Vec2::new(0.2, 1.3),
            Vec2::new(0.9, -0.6),
            Vec2::new(1.0, 0.4),
        );
        let spec = spec_of(vec![
            Segment::Move(p0),
            Segment::Cubic(c1, c2, p3),
            Segment::Line(Vec2::new(0.5, -1.0)),
            Segment::Close,
        ]);
        let mut last = 0;
        for tol in [1e-1, 5e-2, 2.5e-2, 1e-2, 5e-3, 1e-3] {
            let poly = flatten_path(&spec, tol).unwrap();
            assert!(poly.len() >= last);
            last = poly.len();
            let dev = sampled_deviation(|t| cubic_point(p0, c1, c2, p3, t), &poly);
            assert!(dev <= tol, "tol {tol}: {dev}");
        }
    }

    #[test]
    fn arc_command_matches_circle() {
        // Two half-circle arcs of radius 5 around (5, 5).
        let specs = parse_path_specs(&svg(r#"<path d="M0 5 A5 5 0 0 1 10 5 A5 5 0 0 1 0 5 Z"/>"#)).unwrap();
        let poly = flatten_path(&specs[0], 1e-3).unwrap();
        for p in &poly {
            assert!(((p - Vec2::new(5.0, 5.0)).norm() - 5.0).abs() <= 1e-3);
        }
        assert!(poly.iter().any(|p| (p.y - 0.0).abs() < 0.01));
        // The first arc (sweep=1 in y-down) passes through the top (y = 0).
        let Segment::Arc(first) = specs[0].segments[1] else {
            panic!()
        };
        let mid = first.point_at(first.start_angle + 0.5 * first.sweep);
        assert!((mid - Vec2::new(5.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn group_transform_and_inherited_fill() {
        let c = parse_clipart(&svg(r##"<rect width="1" height="1"/>
                <g transform="translate(10 0) scale(2)" fill="#00ff00">
                  <rect width="1" height="1"/>
                </g>"##))
        .unwrap();
        assert_eq!(c.paths[1].fill, Rgba([0, 255, 0, 255]));
        assert_eq!(c.bbox.max, Vec2::new(12.0, 2.0));
        assert!((c.paths[1].area() / c.paths[0].area() - 4.0).abs() < 1e-9);
    }

    #[test]
    fn rounded_rect_and_source_round_trip() {
        let c = parse_clipart(&svg(
            r#"<rect x="0" y="0" width="10" height="6" rx="2" transform="rotate(20)"/>"#,
        ))
        .unwrap();
        let src = &c.paths[0].source;
        let again = parse_clipart(&svg(&format!("<path d=\"{src}\"/>"))).unwrap();
        let a = &c.paths[0];
        let b = &again.paths[0];
        assert!((a.area() - b.area()).abs() < 1e-6);
        let hull = |p: &ClosedPath| Bounds2::of(&p.polygon);
        assert!((hull(a).width() - hull(b).width()).abs() < 1e-3);
    }

    #[test]
    fn serialize_round_trip() {
        let c = parse_clipart(&svg(r##"<circle cx="4" cy="4" r="3" fill="#aa5500"/>
                <ellipse cx="7" cy="4" rx="2" ry="1" fill="#112233" fill-opacity="0.5" data-kind="shading"/>
                <path d="M1 1 C2 0 3 2 4 1 L4 6 L1 6 Z"/>"##))
        .unwrap();
        let again = parse_clipart(to_svg(&c).as_bytes()).unwrap();
        assert_eq!(c.paths.len(), again.paths.len());
        for (a, b) in c.paths.iter().zip(&again.paths) {
            assert_eq!(a.layer, b.layer);
            assert_eq!(a.fill, b.fill);
            assert_eq!(a.kind, b.kind);
            assert_eq!(a.polygon.len(), b.polygon.len());
            for (p, q) in a.polygon.iter().zip(&b.polygon) {
                assert!((p - q).norm() <= 1e-9);
            }
        }
    }

    #[test]
    fn strip_fills_keeps_geometry_only() {
        let c = parse_clipart(&svg(r##"<rect width="2" height="2" fill="red"/>
                <rect x="3" width="2" height="2" fill="red"/>
                <rect x="0.5" y="0.5" width="0.5" height="0.5" fill="white" data-kind="shading"/>
                <rect x="6" width="2" height="2" fill="red"/>"##))
        .unwrap();
        let outline = strip_fills(&c).unwrap();
        assert_eq!(outline.matches("<path").count(), 3);
        assert_eq!(outline.matches("fill=\"none\"").count(), 3);
        let back = parse_path_specs(outline.as_bytes()).unwrap();
        assert!(back.iter().all(|s| s.fill == Rgba::TRANSPARENT));

        let mut only_shading = c.clone();
        for p in &mut only_shading.paths {
            p.kind = PathKind::Shading;
        }
        assert_eq!(strip_fills(&only_shading), Err(Error::EmptyDocument));
    }
}
