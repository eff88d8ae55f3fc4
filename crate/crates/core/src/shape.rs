//! Guiding shapes: loading, alignment to a clipart, mask filtering and
//! per-path point sets.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Bounds2, Vec2, Vec3};
use crate::mask::MaskImage;
use crate::model::{Clipart, PathKind};

/// Vertices lying further than this outside the unit square after alignment
/// indicate a broken shape.
pub const ALIGN_BAND: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeFormat {
    Obj,
    Ply,
    Xyz,
}

impl ShapeFormat {
    /// Guesses the format from a file name extension.
    pub fn from_path(path: &str) -> Option<ShapeFormat> {
        let ext = path.rsplit('.').next()?.to_ascii_lowercase();
        ext.parse().ok()
    }
}

impl FromStr for ShapeFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "obj" => Ok(ShapeFormat::Obj),
            "ply" => Ok(ShapeFormat::Ply),
            "xyz" | "pts" | "txt" => Ok(ShapeFormat::Xyz),
            other => Err(Error::Format(format!("unknown shape format {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuidingShape {
    pub vertices: Vec<Vec3>,
    /// Triangle indices when the input was a mesh.
    pub triangles: Option<Vec<[usize; 3]>>,
}

impl GuidingShape {
    pub fn from_points(vertices: Vec<Vec3>) -> Self {
        GuidingShape {
            vertices,
            triangles: None,
        }
    }

    pub fn xy_bounds(&self) -> Bounds2 {
        let mut b = Bounds2::empty();
        for v in &self.vertices {
            b.include(&Vec2::new(v.x, v.y));
        }
        b
    }

    /// Uniformly scales and translates the shape so its xy bounding box is
    /// centered on `target` and fits inside it. z is scaled but not shifted.
    pub fn align_to(&self, target: &Bounds2) -> Result<GuidingShape> {
        if self.vertices.is_empty() {
            return Err(Error::EmptyShape);
        }
        let src = self.xy_bounds();
        let mut ratios = Vec::new();
        if src.width() > 0.0 {
            ratios.push(target.width() / src.width());
        }
        if src.height() > 0.0 {
            ratios.push(target.height() / src.height());
        }
        // A footprint that is a single point has no scale to match.
        let s = ratios.into_iter().fold(f64::INFINITY, f64::min);
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::DegeneratePoints);
        }
        let sc = src.center();
        let tc = target.center();
        let vertices: Vec<Vec3> = self
            .vertices
            .iter()
            .map(|v| Vec3::new(tc.x + s * (v.x - sc.x), tc.y + s * (v.y - sc.y), s * v.z))
            .collect();
        let aligned = GuidingShape {
            vertices,
            triangles: self.triangles.clone(),
        };
        aligned.check_band()?;
        Ok(aligned)
    }

    fn check_band(&self) -> Result<()> {
        let lo = -ALIGN_BAND;
        let hi = 1.0 + ALIGN_BAND;
        match self
            .vertices
            .iter()
            .position(|v| !v.coords.iter().all(|c| c.is_finite()) || v.x < lo || v.x > hi || v.y < lo || v.y > hi)
        {
            Some(i) => Err(Error::Format(format!(
                "vertex {i} lies outside the normalized frame after alignment"
            ))),
            None => Ok(()),
        }
    }

    pub fn to_obj(&self) -> String {
        let mut out = String::new();
        for v in &self.vertices {
            let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
        }
        for t in self.triangles.iter().flatten() {
            let _ = writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
        }
        out
    }
}

/// Parses a shape without moving it.
pub fn load_shape(bytes: &[u8], format: ShapeFormat) -> Result<GuidingShape> {
    let text = std::str::from_utf8(bytes).map_err(|_| Error::Format("shape file is not valid UTF-8 text".into()))?;
    let shape = match format {
        ShapeFormat::Obj => parse_obj(text)?,
        ShapeFormat::Ply => parse_ply(text)?,
        ShapeFormat::Xyz => parse_xyz(text)?,
    };
    if shape.vertices.is_empty() {
        return Err(Error::EmptyShape);
    }
    Ok(shape)
}

/// Loads a shape and aligns it to the clipart's geometry bounds.
pub fn load_aligned(bytes: &[u8], format: ShapeFormat, clipart: &Clipart) -> Result<GuidingShape> {
    load_shape(bytes, format)?.align_to(&clipart.geometry_bounds())
}

/// Aligns a raw shape to the clipart and drops the vertices that fall on
/// background pixels of its mask. This is what the solver expects as input.
pub fn prepare_shape(raw: &GuidingShape, clipart: &Clipart, mask_resolution: usize) -> Result<GuidingShape> {
    let aligned = raw.align_to(&clipart.geometry_bounds())?;
    let mask = crate::mask::rasterize_mask(clipart, mask_resolution)?;
    filter_by_mask(&aligned, &mask)
}

fn number(tok: &str, line: usize) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| Error::Format(format!("line {line}: bad number {tok:?}")))?;
    if !v.is_finite() {
        return Err(Error::Format(format!("line {line}: non-finite value")));
    }
    Ok(v)
}

fn parse_obj(text: &str) -> Result<GuidingShape> {
    let mut vertices = Vec::new();
    let mut faces: Vec<Vec<i64>> = Vec::new();
    let mut face_lines = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let mut toks = raw.split_whitespace();
        match toks.next() {
            Some("v") => {
                let c: Vec<&str> = toks.collect();
                if c.len() < 3 {
                    return Err(Error::Format(format!("line {line}: vertex needs 3 coordinates")));
                }
                vertices.push(Vec3::new(number(c[0], line)?, number(c[1], line)?, number(c[2], line)?));
            }
            Some("f") => {
                let mut idx = Vec::new();
                for t in toks {
                    let head = t.split('/').next().unwrap_or("");
                    let i: i64 = head
                        .parse()
                        .map_err(|_| Error::Format(format!("line {line}: bad face index {t:?}")))?;
                    idx.push(i);
                }
                if idx.len() < 3 {
                    return Err(Error::Format(format!("line {line}: face needs 3 vertices")));
                }
                faces.push(idx);
                face_lines.push((line, vertices.len() as i64));
            }
            _ => {}
        }
    }
    let total = vertices.len() as i64;
    let mut triangles = Vec::new();
    for (face, (line, seen)) in faces.iter().zip(face_lines) {
        let resolved: Vec<usize> = face
            .iter()
            .map(|&i| {
                // negative indices count back from the vertices read so far
                let k = if i > 0 { i - 1 } else { seen + i };
                if i == 0 || k < 0 || k >= total {
                    Err(Error::Format(format!("line {line}: face index {i} out of range")))
                } else {
                    Ok(k as usize)
                }
            })
            .collect::<Result<_>>()?;
        for k in 1..resolved.len() - 1 {
            triangles.push([resolved[0], resolved[k], resolved[k + 1]]);
        }
    }
    Ok(GuidingShape {
        vertices,
        triangles: (!triangles.is_empty()).then_some(triangles),
    })
}

struct PlyElement {
    name: String,
    count: usize,
    props: Vec<String>,
    list_prop: Option<usize>,
}

fn parse_ply(text: &str) -> Result<GuidingShape> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == "ply" => {}
        _ => return Err(Error::Format("missing ply magic".into())),
    }
    let mut elements: Vec<PlyElement> = Vec::new();
    let mut ascii = false;
    let mut terminated = false;
    for (n, raw) in lines.by_ref() {
        let toks: Vec<&str> = raw.split_whitespace().collect();
        match toks.as_slice() {
            ["format", "ascii", ..] => ascii = true,
            ["format", other, ..] => return Err(Error::Format(format!("unsupported ply format {other}"))),
            ["element", name, count] => elements.push(PlyElement {
                name: name.to_string(),
                count: count
                    .parse()
                    .map_err(|_| Error::Format(format!("line {}: bad element count", n + 1)))?,
                props: Vec::new(),
                list_prop: None,
            }),
            ["property", "list", _, _, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| Error::Format("property before element".into()))?;
                el.list_prop = Some(el.props.len());
                el.props.push(name.to_string());
            }
            ["property", _, name] => elements
                .last_mut()
                .ok_or_else(|| Error::Format("property before element".into()))?
                .props
                .push(name.to_string()),
            ["end_header"] => {
                terminated = true;
                break;
            }
            _ => {}
        }
    }
    if !ascii {
        return Err(Error::Format("ply format line missing".into()));
    }
    if !terminated {
        return Err(Error::Format("ply header not terminated".into()));
    }
    let mut body = lines.filter(|(_, l)| !l.trim().is_empty());
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for el in &elements {
        let pos = |name: &str| el.props.iter().position(|p| p == name);
        for _ in 0..el.count {
            let (n, raw) = body
                .next()
                .ok_or_else(|| Error::Format(format!("ply body ends before element {}", el.name)))?;
            let line = n + 1;
            let toks: Vec<&str> = raw.split_whitespace().collect();
            if el.name == "vertex" {
                let (Some(x), Some(y), Some(z)) = (pos("x"), pos("y"), pos("z")) else {
                    return Err(Error::Format("ply vertex lacks x/y/z".into()));
                };
                let get = |i: usize| {
                    toks.get(i)
                        .ok_or_else(|| Error::Format(format!("line {line}: short vertex record")))
                        .and_then(|t| number(t, line))
                };
                vertices.push(Vec3::new(get(x)?, get(y)?, get(z)?));
            } else if el.name == "face" && el.list_prop == Some(0) {
                let count: usize = toks
                    .first()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| Error::Format(format!("line {line}: bad face record")))?;
                let idx: Vec<usize> = toks
                    .iter()
                    .skip(1)
                    .take(count)
                    .map(|t| {
                        t.parse()
                            .map_err(|_| Error::Format(format!("line {line}: bad face index")))
                    })
                    .collect::<Result<_>>()?;
                if idx.len() != count || count < 3 {
                    return Err(Error::Format(format!("line {line}: bad face record")));
                }
                for k in 1..count - 1 {
                    triangles.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
        }
    }
    if let Some(bad) = triangles.iter().flatten().find(|&&i| i >= vertices.len()) {
        return Err(Error::Format(format!("face index {bad} out of range")));
    }
    Ok(GuidingShape {
        vertices,
        triangles: (!triangles.is_empty()).then_some(triangles),
    })
}

fn parse_xyz(text: &str) -> Result<GuidingShape> {
    let mut vertices = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let l = raw.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = l
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .collect();
        if toks.len() < 3 {
            return Err(Error::Format(format!("line {}: expected x y z", n + 1)));
        }
        vertices.push(Vec3::new(
            number(toks[0], n + 1)?,
            number(toks[1], n + 1)?,
            number(toks[2], n + 1)?,
        ));
    }
    Ok(GuidingShape::from_points(vertices))
}

/// Keeps the vertices that project onto foreground pixels. Triangles are
/// kept only when all three corners survive.
pub fn filter_by_mask(shape: &GuidingShape, mask: &MaskImage) -> Result<GuidingShape> {
    let mut remap = vec![usize::MAX; shape.vertices.len()];
    let mut vertices = Vec::new();
    for (i, v) in shape.vertices.iter().enumerate() {
        if mask.is_foreground_at(&Vec2::new(v.x, v.y)) {
            remap[i] = vertices.len();
            vertices.push(*v);
        }
    }
    if vertices.is_empty() {
        return Err(Error::EmptyShape);
    }
    let triangles = shape.triangles.as_ref().map(|tris| {
        tris.iter()
            .filter(|t| t.iter().all(|&i| remap[i] != usize::MAX))
            .map(|t| [remap[t[0]], remap[t[1]], remap[t[2]]])
            .collect::<Vec<_>>()
    });
    Ok(GuidingShape {
        vertices,
        triangles: triangles.filter(|t| !t.is_empty()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSet {
    pub path_id: usize,
    pub points: Vec<Vec3>,
}

/// For each geometry path, the shape vertices whose xy projection lies in
/// the path's polygon. A vertex may belong to several paths.
pub fn enclosed_points(shape: &GuidingShape, clipart: &Clipart) -> Vec<PointSet> {
    clipart
        .paths
        .iter()
        .filter(|p| p.kind == PathKind::Geometry)
        .map(|path| {
            let b = path.bounds();
            let points = shape
                .vertices
                .iter()
                .filter(|v| {
                    let q = Vec2::new(v.x, v.y);
                    b.contains(&q, crate::geom::BOUNDARY_EPS) && path.contains(&q)
                })
                .copied()
                .collect();
            PointSet {
                path_id: path.id,
                points,
            }
        })
        .collect()
}
