//! Triangle meshes of extruded prisms.

use std::fmt::Write as _;

use nalgebra::Vector3;

use crate::error::Result;
use crate::extrude::{ExtrusionSolution, Prism};
use crate::geom::{signed_area, triangulate, Vec2, Vec3};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[usize; 3]>,
    /// Planar face each triangle belongs to: 0 top cap, 1 bottom cap,
    /// 2 + k the side over polygon edge k.
    pub faces: Vec<usize>,
}

impl TriMesh {
    pub fn normal(&self, t: usize) -> Vector3<f64> {
        let [a, b, c] = self.triangles[t];
        let n = (self.vertices[b] - self.vertices[a]).cross(&(self.vertices[c] - self.vertices[a]));
        let len = n.norm();
        if len > 0.0 {
            n / len
        } else {
            n
        }
    }

    /// Signed enclosed volume by the divergence theorem.
    pub fn volume(&self) -> f64 {
        self.triangles
            .iter()
            .map(|&[a, b, c]| {
                let (a, b, c) = (
                    self.vertices[a].coords,
                    self.vertices[b].coords,
                    self.vertices[c].coords,
                );
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }
}

/// Closed mesh of a prism with outward-facing triangles.
pub fn prism_mesh(prism: &Prism) -> Result<TriMesh> {
    let mut poly: Vec<Vec2> = prism.polygon.clone();
    if signed_area(&poly) < 0.0 {
        poly.reverse();
    }
    let k = poly.len();
    let tris = triangulate(&poly)?;
    let (lo, hi) = (prism.z_min(), prism.z_max());
    let mut vertices = Vec::with_capacity(2 * k);
    vertices.extend(poly.iter().map(|p| Vec3::new(p.x, p.y, lo)));
    vertices.extend(poly.iter().map(|p| Vec3::new(p.x, p.y, hi)));
    let mut triangles = Vec::with_capacity(2 * (k - 2) + 2 * k);
    let mut faces = Vec::with_capacity(triangles.capacity());
    for t in &tris {
        triangles.push([t[0] + k, t[1] + k, t[2] + k]);
        faces.push(0);
    }
    for t in &tris {
        triangles.push([t[0], t[2], t[1]]);
        faces.push(1);
    }
    for i in 0..k {
        let j = (i + 1) % k;
        triangles.push([i, j, j + k]);
        triangles.push([i, j + k, i + k]);
        faces.push(2 + i);
        faces.push(2 + i);
    }
    Ok(TriMesh {
        vertices,
        triangles,
        faces,
    })
}

/// Wavefront OBJ of all prisms, one object group per prism.
pub fn export_obj(solution: &ExtrusionSolution) -> Result<String> {
    let mut out = String::from("# extruded prisms\n");
    let mut base = 1;
    for prism in &solution.prisms {
        let mesh = prism_mesh(prism)?;
        let _ = writeln!(out, "o path{}_copy{}", prism.path_id, prism.copy);
        let _ = writeln!(out, "# fill {}", prism.fill.hex_rgb());
        for v in &mesh.vertices {
            let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
        }
        for t in &mesh.triangles {
            let _ = writeln!(out, "f {} {} {}", t[0] + base, t[1] + base, t[2] + base);
        }
        base += mesh.vertices.len();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extrude::tests::unit_prism;
    use crate::shape::{load_shape, PointSet, ShapeFormat};
    use std::collections::BTreeMap;

    fn edge_counts(m: &TriMesh) -> BTreeMap<(usize, usize), (usize, usize)> {
        let mut count = BTreeMap::new();
        for t in &m.triangles {
            for e in 0..3 {
                let (a, b) = (t[e], t[(e + 1) % 3]);
                let entry = count.entry((a.min(b), a.max(b))).or_insert((0, 0));
                if a < b {
                    entry.0 += 1;
                } else {
                    entry.1 += 1;
                }
            }
        }
        count
    }

    #[test]
    fn cube_counts_and_volume() {
        let m = prism_mesh(&unit_prism(1.0, 0.5)).unwrap();
        assert_eq!(m.triangles.len(), 12);
        assert!((m.volume() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn star_octagon_is_watertight_with_exact_volume() {
        let mut p = unit_prism(0.37, -0.2);
        p.polygon = (0..8)
            .map(|i| {
                let t = std::f64::consts::TAU * i as f64 / 8.0;
                let r = if i % 2 == 0 { 0.45 } else { 0.2 };
                Vec2::new(0.5 + r * t.cos(), 0.5 + r * t.sin())
            })
            .rev()
            .collect();
        let m = prism_mesh(&p).unwrap();
        assert_eq!(m.triangles.len(), 2 * 6 + 16);
        for (_, (fwd, back)) in edge_counts(&m) {
            assert_eq!((fwd, back), (1, 1), "each edge shared once in each direction");
        }
        let area = signed_area(&p.polygon).abs();
        assert!((m.volume() - area * 0.37).abs() < 1e-9);
    }

    #[test]
    fn side_normals_point_outward() {
        let m = prism_mesh(&unit_prism(1.0, 0.0)).unwrap();
        for t in 0..m.triangles.len() {
            let c = m.triangles[t]
                .iter()
                .fold(Vector3::zeros(), |acc, &i| acc + m.vertices[i].coords)
                / 3.0;
            let outward = c - Vector3::new(0.5, 0.5, 0.0);
            assert!(m.normal(t).dot(&outward) > 0.0);
        }
    }

    #[test]
    fn obj_export_groups_and_roundtrips() {
        let mut b = unit_prism(0.5, 1.0);
        b.path_id = 1;
        let mut c = unit_prism(0.5, 2.0);
        c.path_id = 2;
        let prisms = vec![unit_prism(1.0, 0.0), b, c];
        let sets: Vec<PointSet> = (0..3)
            .map(|i| PointSet {
                path_id: i,
                points: vec![],
            })
            .collect();
        let sol = ExtrusionSolution::evaluate(prisms, &sets, 0.01, 0.01);
        let obj = export_obj(&sol).unwrap();
        assert_eq!(obj.lines().filter(|l| l.starts_with("o ")).count(), 3);
        let shape = load_shape(obj.as_bytes(), ShapeFormat::Obj).unwrap();
        let expected: Vec<Vec3> = sol
            .prisms
            .iter()
            .flat_map(|p| prism_mesh(p).unwrap().vertices)
            .collect();
        assert_eq!(shape.vertices.len(), 24);
        for (a, b) in shape.vertices.iter().zip(&expected) {
            assert!((a - b).norm() < 1e-9);
        }
        assert_eq!(shape.triangles.unwrap().len(), 36);
    }
}
