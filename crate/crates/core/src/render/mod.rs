//! Orthographic z-buffer rendering of solved prisms.

pub mod mesh;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

pub use mesh::{export_obj, prism_mesh, TriMesh};

use crate::error::{Error, Result};
use crate::extrude::ExtrusionSolution;
use crate::geom::Vec3;
use crate::mask::MaskImage;
use crate::model::{Rgba, Viewpoint};

pub const OUTLINE_DARKEN: f64 = 0.6;
/// Default fraction of the scene extent left free around it.
pub const FRAME_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderConfig {
    pub width: usize,
    pub height: usize,
    pub outline: bool,
    /// Background composited when the image is encoded.
    pub background: Rgba,
    /// Point that maps to the image center; defaults to the scene center.
    pub target: Option<[f64; 3]>,
    /// Minimum angle between faces of one prism that draws an outline.
    pub crease_degrees: f64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            width: 512,
            height: 512,
            outline: true,
            background: Rgba::WHITE,
            target: None,
            crease_degrees: 30.0,
        }
    }
}

/// Orthographic camera basis for a viewpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraBasis {
    /// Unit vector from the scene toward the viewer.
    pub dir: Vector3<f64>,
    pub right: Vector3<f64>,
    pub up: Vector3<f64>,
}

impl CameraBasis {
    pub fn new(view: &Viewpoint) -> Self {
        let (az, el) = (view.azimuth.to_radians(), view.elevation.to_radians());
        let dir = Vector3::new(az.sin() * el.cos(), el.sin(), az.cos() * el.cos());
        let right = Vector3::new(az.cos(), 0.0, -az.sin());
        let up = dir.cross(&right);
        CameraBasis { dir, right, up }
    }
}

/// Screen-plane coordinates `(u, v)` and depth (larger is nearer) of a
/// point. The front view maps `(x, y, z)` to `(x, y, z)`.
pub fn project(p: &Vec3, view: &Viewpoint) -> Vec3 {
    let b = CameraBasis::new(view);
    Vec3::new(p.coords.dot(&b.right), p.coords.dot(&b.up), p.coords.dot(&b.dir))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaffoldImage {
    pub width: usize,
    pub height: usize,
    /// Row-major colors; background pixels have alpha 0.
    pub color: Vec<Rgba>,
    /// Camera depth of the visible surface; `-inf` where nothing was drawn.
    pub depth: Vec<f64>,
    /// Index of the visible prism.
    pub object: Vec<Option<usize>>,
    pub background: Rgba,
}

impl ScaffoldImage {
    pub fn covered(&self, col: usize, row: usize) -> bool {
        self.object[row * self.width + col].is_some()
    }

    pub fn coverage(&self) -> usize {
        self.object.iter().filter(|o| o.is_some()).count()
    }

    pub fn mask(&self) -> MaskImage {
        MaskImage {
            width: self.width,
            height: self.height,
            bits: self.object.iter().map(|o| o.is_some()).collect(),
        }
    }

    /// RGBA 8-bit PNG with the background filled in.
    pub fn to_png(&self) -> Result<Vec<u8>> {
        let mut data = Vec::with_capacity(self.width * self.height * 4);
        for c in &self.color {
            let px = if c.a() == 0 { self.background } else { *c };
            data.extend_from_slice(&px.0);
        }
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, self.width as u32, self.height as u32);
            enc.set_color(png::ColorType::Rgba);
            enc.set_depth(png::BitDepth::Eight);
            let mut w = enc.write_header().map_err(|e| Error::Io(e.to_string()))?;
            w.write_image_data(&data).map_err(|e| Error::Io(e.to_string()))?;
        }
        Ok(out)
    }
}

struct Frame {
    basis: CameraBasis,
    target: Vector3<f64>,
    /// Scene units per pixel.
    pixel: f64,
    width: usize,
    height: usize,
}

impl Frame {
    /// Pixel-space position (column, row) and depth.
    fn to_screen(&self, p: &Vec3) -> (f64, f64, f64) {
        let q = p.coords - self.target;
        let u = q.dot(&self.basis.right);
        let v = q.dot(&self.basis.up);
        (
            u / self.pixel + self.width as f64 / 2.0,
            self.height as f64 / 2.0 - v / self.pixel,
            p.coords.dot(&self.basis.dir),
        )
    }
}

fn frame_for(meshes: &[TriMesh], view: &Viewpoint, config: &RenderConfig) -> Frame {
    let basis = CameraBasis::new(view);
    let mut lo = Vector3::repeat(f64::INFINITY);
    let mut hi = Vector3::repeat(f64::NEG_INFINITY);
    for v in meshes.iter().flat_map(|m| &m.vertices) {
        lo = lo.inf(&v.coords);
        hi = hi.sup(&v.coords);
    }
    let target = match config.target {
        Some(t) => Vector3::from(t),
        None => (lo + hi) / 2.0,
    };
    let scale = view.ortho_scale.unwrap_or_else(|| {
        let (mut du, mut dv) = (0.0f64, 0.0f64);
        for v in meshes.iter().flat_map(|m| &m.vertices) {
            let q = v.coords - target;
            du = du.max(q.dot(&basis.right).abs());
            dv = dv.max(q.dot(&basis.up).abs());
        }
        let aspect = config.width as f64 / config.height as f64;
        let s = 2.0 * dv.max(du / aspect) * (1.0 + 2.0 * FRAME_MARGIN);
        if s > 0.0 {
            s
        } else {
            1.0
        }
    });
    Frame {
        basis,
        target,
        pixel: scale / config.height as f64,
        width: config.width,
        height: config.height,
    }
}

/// Renders the prisms of a solution from a viewpoint.
///
/// Each prism is filled with the opaque color of its path. With outlines on,
/// pixels at silhouettes, at boundaries between prisms and at creases
/// sharper than `crease_degrees` inside a prism are darkened.
pub fn render(solution: &ExtrusionSolution, view: &Viewpoint, config: &RenderConfig) -> Result<ScaffoldImage> {
    view.validate()?;
    if config.width == 0 || config.height == 0 {
        return Err(Error::Config("image dimensions must be positive".into()));
    }
    let meshes: Vec<TriMesh> = solution.prisms.iter().map(prism_mesh).collect::<Result<_>>()?;
    let frame = frame_for(&meshes, view, config);
    let (w, h) = (config.width, config.height);
    let mut depth = vec![f64::NEG_INFINITY; w * h];
    let mut object: Vec<Option<usize>> = vec![None; w * h];
    let mut normal: Vec<Vector3<f64>> = vec![Vector3::zeros(); w * h];
    let mut face: Vec<usize> = vec![usize::MAX; w * h];

    for (obj, mesh) in meshes.iter().enumerate() {
        let screen: Vec<(f64, f64, f64)> = mesh.vertices.iter().map(|v| frame.to_screen(v)).collect();
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let [a, b, c] = tri.map(|i| screen[i]);
            let area = (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0);
            if area.abs() < 1e-12 {
                continue;
            }
            let n = mesh.normal(t);
            let x0 = a.0.min(b.0).min(c.0).floor().max(0.0) as usize;
            let x1 = (a.0.max(b.0).max(c.0).ceil().max(0.0) as usize).min(w);
            let y0 = a.1.min(b.1).min(c.1).floor().max(0.0) as usize;
            let y1 = (a.1.max(b.1).max(c.1).ceil().max(0.0) as usize).min(h);
            for row in y0..y1 {
                let py = row as f64 + 0.5;
                for col in x0..x1 {
                    let px = col as f64 + 0.5;
                    let w0 = ((b.0 - px) * (c.1 - py) - (b.1 - py) * (c.0 - px)) / area;
                    let w1 = ((c.0 - px) * (a.1 - py) - (c.1 - py) * (a.0 - px)) / area;
                    let w2 = 1.0 - w0 - w1;
                    if w0 < 0.0 || w1 < 0.0 || w2 < 0.0 {
                        continue;
                    }
                    let z = w0 * a.2 + w1 * b.2 + w2 * c.2;
                    let k = row * w + col;
                    if z > depth[k] {
                        depth[k] = z;
                        object[k] = Some(obj);
                        normal[k] = n;
                        face[k] = mesh.faces[t];
                    }
                }
            }
        }
    }

    let mut color: Vec<Rgba> = object
        .iter()
        .map(|o| o.map_or(Rgba::TRANSPARENT, |i| solution.prisms[i].fill.opaque()))
        .collect();
    if config.outline {
        let cos_crease = config.crease_degrees.to_radians().cos();
        let mut edge = vec![false; w * h];
        for row in 0..h {
            for col in 0..w {
                let k = row * w + col;
                let Some(me) = object[k] else { continue };
                let neighbours = [
                    (col > 0).then(|| k - 1),
                    (col + 1 < w).then(|| k + 1),
                    (row > 0).then(|| k - w),
                    (row + 1 < h).then(|| k + w),
                ];
                for q in neighbours {
                    let Some(q) = q else {
                        continue;
                    };
                    let hit = match object[q] {
                        None => true,
                        Some(other) if other != me => depth[k] >= depth[q],
                        Some(_) => face[q] != face[k] && normal[q].dot(&normal[k]) < cos_crease && depth[k] >= depth[q],
                    };
                    if hit {
                        edge[k] = true;
                        break;
                    }
                }
            }
        }
        for (c, e) in color.iter_mut().zip(&edge) {
            if *e {
                *c = c.darken(OUTLINE_DARKEN);
            }
        }
    }
    Ok(ScaffoldImage {
        width: w,
        height: h,
        color,
        depth,
        object,
        background: config.background,
    })
}

/// Intersection over union of the rendered foreground and a mask.
pub fn silhouette_iou(image: &ScaffoldImage, mask: &MaskImage) -> Result<f64> {
    if image.width != mask.width || image.height != mask.height {
        return Err(Error::Config(format!(
            "image is {}x{} but mask is {}x{}",
            image.width, image.height, mask.width, mask.height
        )));
    }
    Ok(mask_iou(&image.mask(), mask))
}

pub fn mask_iou(a: &MaskImage, b: &MaskImage) -> f64 {
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.bits.iter().zip(&b.bits) {
        inter += (x && y) as usize;
        union += (x || y) as usize;
    }
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}
