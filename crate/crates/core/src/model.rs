//! Clipart domain model: closed paths, viewpoints, structural annotations and validation.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::geom::{self, Bounds2, Vec2};

/// 8-bit straight-alpha color.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rgba(pub [u8; 4]);

impl Rgba {
    pub const BLACK: Rgba = Rgba([0, 0, 0, 255]);
    pub const WHITE: Rgba = Rgba([255, 255, 255, 255]);
    pub const TRANSPARENT: Rgba = Rgba([0, 0, 0, 0]);

    pub fn r(&self) -> u8 {
        self.0[0]
    }
    pub fn g(&self) -> u8 {
        self.0[1]
    }
    pub fn b(&self) -> u8 {
        self.0[2]
    }
    pub fn a(&self) -> u8 {
        self.0[3]
    }

    /// Multiplies the color channels by `factor`, keeping alpha.
    pub fn darken(&self, factor: f64) -> Rgba {
        let f = |c: u8| (c as f64 * factor).round().clamp(0.0, 255.0) as u8;
        Rgba([f(self.0[0]), f(self.0[1]), f(self.0[2]), self.0[3]])
    }

    pub fn opaque(&self) -> Rgba {
        Rgba([self.0[0], self.0[1], self.0[2], 255])
    }

    /// `#rrggbb`, the SVG paint form without alpha.
    pub fn hex_rgb(&self) -> String {
        format!("#{:02x}{:02x}{:02x}", self.0[0], self.0[1], self.0[2])
    }
}

impl fmt::Display for Rgba {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "#{:02x}{:02x}{:02x}{:02x}",
            self.0[0], self.0[1], self.0[2], self.0[3]
        )
    }
}

impl FromStr for Rgba {
    type Err = Error;

    /// Accepts `#rgb`, `#rrggbb` and `#rrggbbaa`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::parse("color", format!("invalid color {s:?}"));
        let hex = s.strip_prefix('#').ok_or_else(bad)?;
        if !hex.chars().all(|c| c.is_ascii_hexdigit()) {
            return Err(bad());
        }
        let byte = |i: usize| u8::from_str_radix(&hex[i..i + 2], 16).map_err(|_| bad());
        match hex.len() {
            3 => {
                let n = |i: usize| u8::from_str_radix(&hex[i..i + 1], 16).map(|v| v * 17);
                Ok(Rgba([
                    n(0).map_err(|_| bad())?,
                    n(1).map_err(|_| bad())?,
                    n(2).map_err(|_| bad())?,
                    255,
                ]))
            }
            6 => Ok(Rgba([byte(0)?, byte(2)?, byte(4)?, 255])),
            8 => Ok(Rgba([byte(0)?, byte(2)?, byte(4)?, byte(6)?])),
            _ => Err(bad()),
        }
    }
}

impl Serialize for Rgba {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Rgba {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PathKind {
    #[default]
    Geometry,
    Shading,
}

impl FromStr for PathKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "geometry" => Ok(PathKind::Geometry),
            "shading" => Ok(PathKind::Shading),
            other => Err(Error::InvalidAnnotation(format!("unknown path kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedPath {
    pub id: usize,
    /// Normalized-frame outline, implicitly closed, y up.
    pub polygon: Vec<Vec2>,
    pub fill: Rgba,
    /// Paint order, 0 is bottom-most.
    pub layer: usize,
    #[serde(default)]
    pub kind: PathKind,
    /// Absolute path data of the subpath this outline was flattened from, in document units.
    #[serde(default)]
    pub source: String,
}

impl ClosedPath {
    pub fn bounds(&self) -> Bounds2 {
        Bounds2::of(&self.polygon)
    }

    pub fn area(&self) -> f64 {
        geom::signed_area(&self.polygon).abs()
    }

    pub fn contains(&self, p: &Vec2) -> bool {
        geom::point_in_polygon(p, &self.polygon)
    }
}

/// A camera direction around the scene, in degrees.
///
/// Azimuth rotates about the up axis (y); elevation tilts toward +y. The input
/// view of every clipart is `(0, 0)`: camera on +z looking along -z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Viewpoint {
    pub azimuth: f64,
    pub elevation: f64,
    /// Scene units spanned by the image height; `None` frames the scene automatically.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ortho_scale: Option<f64>,
}

impl Viewpoint {
    pub const FRONT: Viewpoint = Viewpoint::new(0.0, 0.0);
    pub const SIDE: Viewpoint = Viewpoint::new(90.0, 0.0);
    pub const TOP: Viewpoint = Viewpoint::new(0.0, 90.0);
    pub const UPPER45: Viewpoint = Viewpoint::new(45.0, 45.0);

    pub const fn new(azimuth: f64, elevation: f64) -> Self {
        Viewpoint {
            azimuth,
            elevation,
            ortho_scale: None,
        }
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.ortho_scale = Some(scale);
        self
    }

    pub fn preset(name: &str) -> Option<Viewpoint> {
        match name {
            "front" => Some(Self::FRONT),
            "side" => Some(Self::SIDE),
            "top" => Some(Self::TOP),
            "upper45" => Some(Self::UPPER45),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(-90.0..=90.0).contains(&self.elevation) || !self.azimuth.is_finite() {
            return Err(Error::Config(format!(
                "elevation must lie in [-90, 90], got {}",
                self.elevation
            )));
        }
        if let Some(s) = self.ortho_scale {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Config(format!("ortho scale must be positive, got {s}")));
            }
        }
        Ok(())
    }
}

impl Default for Viewpoint {
    fn default() -> Self {
        Self::FRONT
    }
}

impl FromStr for Viewpoint {
    type Err = Error;

    /// A preset name or `azimuth,elevation[,scale]`.
    fn from_str(s: &str) -> Result<Self> {
        if let Some(v) = Viewpoint::preset(s) {
            return Ok(v);
        }
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let num = |p: &str| {
            p.parse::<f64>()
                .map_err(|_| Error::Config(format!("unknown viewpoint {s:?}")))
        };
        let v = match parts.as_slice() {
            [a, e] => Viewpoint::new(num(a)?, num(e)?),
            [a, e, sc] => Viewpoint::new(num(a)?, num(e)?).with_scale(num(sc)?),
            _ => return Err(Error::Config(format!("unknown viewpoint {s:?}"))),
        };
        v.validate()?;
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clipart {
    pub paths: Vec<ClosedPath>,
    #[serde(default)]
    pub input_view: Viewpoint,
    /// Document-space extent before normalization.
    pub bbox: Bounds2,
}

impl Clipart {
    pub fn path(&self, id: usize) -> Option<&ClosedPath> {
        self.paths.iter().find(|p| p.id == id)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("clipart serializes")
    }

    pub fn from_json(text: &str) -> Result<Clipart> {
        serde_json::from_str(text).map_err(|e| Error::parse("clipart json", e.to_string()))
    }

    /// Normalized extent of the geometry paths.
    pub fn geometry_bounds(&self) -> Bounds2 {
        geometry_paths(self)
            .iter()
            .fold(Bounds2::empty(), |b, p| b.union(&p.bounds()))
    }

    /// Applies a `{"<id>": "geometry" | "shading"}` override map.
    pub fn apply_kind_overrides(&mut self, overrides: &BTreeMap<String, PathKind>) -> Result<()> {
        for (key, kind) in overrides {
            let id: usize = key
                .parse()
                .map_err(|_| Error::InvalidAnnotation(format!("bad path id {key:?}")))?;
            let path = self
                .paths
                .iter_mut()
                .find(|p| p.id == id)
                .ok_or(Error::BadReference(id))?;
            path.kind = *kind;
        }
        Ok(())
    }
}

pub fn parse_kind_overrides(text: &str) -> Result<BTreeMap<String, PathKind>> {
    serde_json::from_str(text).map_err(|e| Error::parse("kind overrides", e.to_string()))
}

/// The paths that describe shape, in document order.
pub fn geometry_paths(clipart: &Clipart) -> Vec<ClosedPath> {
    clipart
        .paths
        .iter()
        .filter(|p| p.kind == PathKind::Geometry)
        .cloned()
        .collect()
}

/// A user-declared structural relation between paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Annotation {
    MultipleObjects { path: usize, count: usize },
    SameThickness { a: usize, b: usize },
    SameDepth { a: usize, b: usize },
    DepthOrder { front: usize, behind: usize },
}

impl Annotation {
    pub fn referenced(&self) -> Vec<usize> {
        match *self {
            Annotation::MultipleObjects { path, .. } => vec![path],
            Annotation::SameThickness { a, b } | Annotation::SameDepth { a, b } => vec![a, b],
            Annotation::DepthOrder { front, behind } => vec![front, behind],
        }
    }
}

pub fn parse_annotations(text: &str) -> Result<Vec<Annotation>> {
    serde_json::from_str(text).map_err(|e| Error::parse("annotations", e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    DegeneratePolygon,
    OpenPath,
    SelfIntersection,
    ZeroArea,
    NonFinite,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ViolationKind::DegeneratePolygon => "degenerate polygon",
            ViolationKind::OpenPath => "open path",
            ViolationKind::SelfIntersection => "self-intersection",
            ViolationKind::ZeroArea => "zero area",
            ViolationKind::NonFinite => "non-finite coordinate",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub path_id: usize,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

fn path_violations(path: &ClosedPath) -> Vec<ViolationKind> {
    let poly = &path.polygon;
    if poly.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
        return vec![ViolationKind::NonFinite];
    }
    let mut out = Vec::new();
    if poly.len() >= 2 && poly.first() == poly.last() {
        out.push(ViolationKind::OpenPath);
    }
    if poly.len() < 3 {
        out.push(ViolationKind::DegeneratePolygon);
        return out;
    }
    if geom::is_self_intersecting(poly) {
        out.push(ViolationKind::SelfIntersection);
    }
    if geom::signed_area(poly).abs() <= f64::EPSILON {
        out.push(ViolationKind::ZeroArea);
    }
    out
}

pub fn validate_clipart(clipart: &Clipart) -> ValidationReport {
    let violations = clipart
        .paths
        .iter()
        .flat_map(|p| {
            path_violations(p)
                .into_iter()
                .map(|kind| Violation { path_id: p.id, kind })
        })
        .collect();
    ValidationReport { violations }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub fn rect_path(id: usize, x0: f64, y0: f64, x1: f64, y1: f64) -> ClosedPath {
        ClosedPath {
            id,
            polygon: vec![
                Vec2::new(x0, y0),
                Vec2::new(x1, y0),
                Vec2::new(x1, y1),
                Vec2::new(x0, y1),
            ],
            fill: Rgba([200, 30, 30, 255]),
            layer: id,
            kind: PathKind::Geometry,
            source: String::new(),
        }
    }

    pub fn clipart_of(paths: Vec<ClosedPath>) -> Clipart {
        let bbox = paths.iter().fold(Bounds2::empty(), |b, p| b.union(&p.bounds()));
        Clipart {
            paths,
            input_view: Viewpoint::FRONT,
            bbox,
        }
    }

    #[test]
    fn unit_square_is_valid() {
        let c = clipart_of(vec![rect_path(0, 0.0, 0.0, 1.0, 1.0)]);
        assert!(validate_clipart(&c).is_valid());
    }

    #[test]
    fn two_vertex_path_is_degenerate() {
        let mut p = rect_path(0, 0.0, 0.0, 1.0, 1.0);
        p.polygon.truncate(2);
        let report = validate_clipart(&clipart_of(vec![p]));
        assert_eq!(
            report.violations,
            vec![Violation {
                path_id: 0,
                kind: ViolationKind::DegeneratePolygon
            }]
        );
        assert_eq!(report.violations[0].kind.to_string(), "degenerate polygon");
    }

    #[test]
    fn bowtie_reports_self_intersection() {
        let mut p = rect_path(3, 0.0, 0.0, 1.0, 1.0);
        p.polygon = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, 1.0),
        ];
        let report = validate_clipart(&clipart_of(vec![p]));
        assert!(report.violations.contains(&Violation {
            path_id: 3,
            kind: ViolationKind::SelfIntersection
        }));
    }

    #[test]
    fn repeated_closing_vertex_flags_open_path() {
        let mut p = rect_path(0, 0.0, 0.0, 1.0, 1.0);
        p.polygon.push(p.polygon[0]);
        let kinds: Vec<_> = validate_clipart(&clipart_of(vec![p]))
            .violations
            .into_iter()
            .map(|v| v.kind)
            .collect();
        assert!(kinds.contains(&ViolationKind::OpenPath));
    }

    #[test]
    fn geometry_filter_cases() {
        let mut paths: Vec<_> = (0..5).map(|i| rect_path(i, 0.0, 0.0, 1.0, 1.0)).collect();
        let all = clipart_of(paths.clone());
        assert_eq!(geometry_paths(&all), all.paths);

        paths[1].kind = PathKind::Shading;
        paths[3].kind = PathKind::Shading;
        let some = clipart_of(paths.clone());
        let ids: Vec<_> = geometry_paths(&some).iter().map(|p| p.id).collect();
        assert_eq!(ids, vec![0, 2, 4]);
        assert_eq!(some.paths.len(), 5);

        for p in &mut paths {
            p.kind = PathKind::Shading;
        }
        assert!(geometry_paths(&clipart_of(paths)).is_empty());
    }

    #[test]
    fn annotation_json_schema() {
        let text = r#"[
            {"type":"same_thickness","a":1,"b":2},
            {"type":"multiple_objects","path":0,"count":4},
            {"type":"same_depth","a":3,"b":4},
            {"type":"depth_order","front":5,"behind":6}
        ]"#;
        let anns = parse_annotations(text).unwrap();
        assert_eq!(anns[0], Annotation::SameThickness { a: 1, b: 2 });
        assert_eq!(anns[1], Annotation::MultipleObjects { path: 0, count: 4 });
        assert_eq!(anns[3], Annotation::DepthOrder { front: 5, behind: 6 });
        assert!(parse_annotations(r#"[{"type":"bogus"}]"#).is_err());
    }

    #[test]
    fn kind_overrides_apply_and_reject_unknown_ids() {
        let mut c = clipart_of(vec![rect_path(0, 0.0, 0.0, 1.0, 1.0)]);
        let map = parse_kind_overrides(r#"{"0":"shading"}"#).unwrap();
        c.apply_kind_overrides(&map).unwrap();
        assert_eq!(c.paths[0].kind, PathKind::Shading);
        let bad = parse_kind_overrides(r#"{"9":"geometry"}"#).unwrap();
        assert_eq!(c.apply_kind_overrides(&bad), Err(Error::BadReference(9)));
    }

    #[test]
    fn color_parsing() {
        assert_eq!("#f00".parse::<Rgba>().unwrap(), Rgba([255, 0, 0, 255]));
        assert_eq!("#10203040".parse::<Rgba>().unwrap(), Rgba([16, 32, 48, 64]));
        assert!("red".parse::<Rgba>().is_err());
        assert_eq!(Rgba([100, 50, 10, 255]).darken(0.6), Rgba([60, 30, 6, 255]));
    }

    #[test]
    fn viewpoint_parsing() {
        assert_eq!("upper45".parse::<Viewpoint>().unwrap(), Viewpoint::UPPER45);
        assert_eq!("30,10".parse::<Viewpoint>().unwrap(), Viewpoint::new(30.0, 10.0));
        assert!("0,120".parse::<Viewpoint>().is_err());
        assert!("sideways".parse::<Viewpoint>().is_err());
    }
}
