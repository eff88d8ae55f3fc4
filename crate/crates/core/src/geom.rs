//! Planar polygon primitives shared by ingest, shape projection, extrusion and meshing.
//!
//! Polygons are plain vertex slices, implicitly closed (the first vertex is not
//! repeated). Containment uses the even-odd rule with an inclusive boundary.

use crate::error::{Error, Result};
use nalgebra::{Point2, Point3};

pub type Vec2 = Point2<f64>;
pub type Vec3 = Point3<f64>;

/// Distance under which a point counts as lying on a polygon boundary.
pub const BOUNDARY_EPS: f64 = 1e-9;

#[inline]
fn cross(o: &Vec2, a: &Vec2, b: &Vec2) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Shoelace area, positive for counter-clockwise winding.
pub fn signed_area(poly: &[Vec2]) -> f64 {
    let n = poly.len();
    let mut acc = 0.0;
    for i in 0..n {
        let a = &poly[i];
        let b = &poly[(i + 1) % n];
        acc += a.x * b.y - b.x * a.y;
    }
    0.5 * acc
}

pub fn point_segment_distance(p: &Vec2, a: &Vec2, b: &Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Unsigned distance from `p` to the polygon outline.
pub fn boundary_distance(p: &Vec2, poly: &[Vec2]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| point_segment_distance(p, &poly[i], &poly[(i + 1) % n]))
        .fold(f64::INFINITY, f64::min)
}

/// Even-odd containment with points within [`BOUNDARY_EPS`] of an edge counted as inside.
pub fn point_in_polygon(p: &Vec2, poly: &[Vec2]) -> bool {
    let n = poly.len();
    if n == 0 {
        return false;
    }
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let a = &poly[i];
        let b = &poly[j];
        if point_segment_distance(p, a, b) <= BOUNDARY_EPS {
            return true;
        }
        if (a.y > p.y) != (b.y > p.y) {
            let x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x_cross {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Closed-segment intersection test (touching counts).
pub fn segments_intersect(a: &Vec2, b: &Vec2, c: &Vec2, d: &Vec2) -> bool {
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    let on = |p: &Vec2, q: &Vec2, r: &Vec2, o: f64| {
        o == 0.0 && r.x >= p.x.min(q.x) && r.x <= p.x.max(q.x) && r.y >= p.y.min(q.y) && r.y <= p.y.max(q.y)
    };
    on(c, d, a, d1) || on(c, d, b, d2) || on(a, b, c, d3) || on(a, b, d, d4)
}

/// True when any two non-adjacent edges meet, or adjacent edges fold back onto each other.
pub fn is_self_intersecting(poly: &[Vec2]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        let a = &poly[i];
        let b = &poly[(i + 1) % n];
        for j in (i + 1)..n {
            let c = &poly[j];
            let d = &poly[(j + 1) % n];
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                // Shared endpoint is expected; overlap along the edge is not.
                let (shared, p, q) = if j == i + 1 { (b, a, d) } else { (a, b, c) };
                if cross(shared, p, q) == 0.0 && (p - shared).dot(&(q - shared)) > 0.0 {
                    return true;
                }
                continue;
            }
            if segments_intersect(a, b, c, d) {
                return true;
            }
        }
    }
    false
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Bounds2 {
    pub min: Vec2,
    pub max: Vec2,
}

impl Bounds2 {
    pub fn empty() -> Self {
        Bounds2 {
            min: Vec2::new(f64::INFINITY, f64::INFINITY),
            max: Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }

    pub fn of<'a>(points: impl IntoIterator<Item = &'a Vec2>) -> Self {
        let mut b = Self::empty();
        for p in points {
            b.include(p);
        }
        b
    }

    pub fn include(&mut self, p: &Vec2) {
        self.min.x = self.min.x.min(p.x);
        self.min.y = self.min.y.min(p.y);
        self.max.x = self.max.x.max(p.x);
        self.max.y = self.max.y.max(p.y);
    }

    pub fn union(&self, other: &Bounds2) -> Bounds2 {
        let mut b = *self;
        b.include(&other.min);
        b.include(&other.max);
        b
    }

    pub fn is_empty(&self) -> bool {
        self.min.x > self.max.x || self.min.y > self.max.y
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn center(&self) -> Vec2 {
        Vec2::new(0.5 * (self.min.x + self.max.x), 0.5 * (self.min.y + self.max.y))
    }

    pub fn contains(&self, p: &Vec2, eps: f64) -> bool {
        p.x >= self.min.x - eps && p.x <= self.max.x + eps && p.y >= self.min.y - eps && p.y <= self.max.y + eps
    }

    pub fn overlaps(&self, other: &Bounds2) -> bool {
        self.min.x <= other.max.x && other.min.x <= self.max.x && self.min.y <= other.max.y && other.min.y <= self.max.y
    }
}

/// Ear-clipping triangulation of a simple polygon.
///
/// Returned triangles index into `poly` and are always wound counter-clockwise,
/// whatever the input orientation.
pub fn triangulate(poly: &[Vec2]) -> Result<Vec<[usize; 3]>> {
    let n = poly.len();
    if n < 3 {
        return Err(Error::Triangulation(format!("{n} vertices")));
    }
    let mut ring: Vec<usize> = (0..n).collect();
    if signed_area(poly) < 0.0 {
        ring.reverse();
    }
    let mut tris = Vec::with_capacity(n - 2);
    let mut allow_flat = false;
    while ring.len() > 3 {
        let m = ring.len();
        let mut clipped = false;
        for k in 0..m {
            let ip = ring[(k + m - 1) % m];
            let ic = ring[k];
            let inx = ring[(k + 1) % m];
            let (a, b, c) = (&poly[ip], &poly[ic], &poly[inx]);
            let turn = cross(a, b, c);
            if turn < 0.0 || (turn == 0.0 && !allow_flat) {
                continue;
            }
            let blocked = ring.iter().any(|&o| {
                if o == ip || o == ic || o == inx {
                    return false;
                }
                let p = &poly[o];
                if p == a || p == b || p == c {
                    return false;
                }
                cross(a, b, p) >= 0.0 && cross(b, c, p) >= 0.0 && cross(c, a, p) >= 0.0
            });
            if blocked && turn > 0.0 {
                continue;
            }
            tris.push([ip, ic, inx]);
            ring.remove(k);
            clipped = true;
            allow_flat = false;
            break;
        }
        if !clipped {
            if allow_flat {
                return Err(Error::Triangulation("no ear found; polygon is not simple".into()));
            }
            allow_flat = true;
        }
    }
    tris.push([ring[0], ring[1], ring[2]]);
    // Ears of a self-intersecting ring overlap or leave gaps.
    let tiled: f64 = tris
        .iter()
        .map(|t| cross(&poly[t[0]], &poly[t[1]], &poly[t[2]]).abs() / 2.0)
        .sum();
    let area = signed_area(poly).abs();
    let scale = Bounds2::of(poly).width().max(Bounds2::of(poly).height());
    if (tiled - area).abs() > 1e-9 * scale * scale {
        return Err(Error::Triangulation(format!(
            "ears cover {tiled} but the outline encloses {area}; polygon is not simple"
        )));
    }
    Ok(tris)
}

fn clip_convex(subject: &[Vec2], clip: &[Vec2; 3]) -> Vec<Vec2> {
    let mut out: Vec<Vec2> = subject.to_vec();
    for i in 0..3 {
        let a = clip[i];
        let b = clip[(i + 1) % 3];
        let input = std::mem::take(&mut out);
        if input.is_empty() {
            break;
        }
        let m = input.len();
        for k in 0..m {
            let cur = input[k];
            let prev = input[(k + m - 1) % m];
            let cin = cross(&a, &b, &cur) >= 0.0;
            let pin = cross(&a, &b, &prev) >= 0.0;
            if cin != pin {
                let dp = cross(&a, &b, &prev);
                let dc = cross(&a, &b, &cur);
                let t = dp / (dp - dc);
                out.push(prev + (cur - prev) * t);
            }
            if cin {
                out.push(cur);
            }
        }
    }
    out
}

/// Area of the intersection of two simple polygons, via pairwise clipping of
/// their ear-clipped triangles.
pub fn overlap_area(a: &[Vec2], b: &[Vec2]) -> f64 {
    let ba = Bounds2::of(a);
    let bb = Bounds2::of(b);
    if !ba.overlaps(&bb) {
        return 0.0;
    }
    let (Ok(ta), Ok(tb)) = (triangulate(a), triangulate(b)) else {
        return 0.0;
    };
    let mut area = 0.0;
    for t in &ta {
        let tri_a = [a[t[0]], a[t[1]], a[t[2]]];
        for s in &tb {
            let tri_b = [b[s[0]], b[s[1]], b[s[2]]];
            let piece = clip_convex(&tri_a, &tri_b);
            if piece.len() >= 3 {
                area += signed_area(&piece).abs();
            }
        }
    }
    area
}
