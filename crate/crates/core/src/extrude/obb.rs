//! Oriented bounding boxes and the per-volume initial guess.

use nalgebra::{Matrix2, SymmetricEigen, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::{Samples, SolveConfig};
use crate::error::{Error, Result};
use crate::geom::{Vec2, Vec3};

/// Box whose third axis family is pinned to z; the xy axes come from the
/// principal directions of the xy spread. Axes are sorted by decreasing
/// variance and extents are full side lengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obb {
    pub center: Vec3,
    pub axes: [Vector3<f64>; 3],
    pub extents: [f64; 3],
    /// Variance of the points along each axis.
    pub variances: [f64; 3],
}

/// Relative eigenvalue gap under which the xy principal directions are
/// considered undetermined and the coordinate axes are used instead.
const TIE_EPS: f64 = 1e-9;

fn canonical_sign(v: Vector3<f64>) -> Vector3<f64> {
    let k = v.iamax();
    if v[k] < 0.0 {
        -v
    } else {
        v
    }
}

pub fn fit_obb(points: &[Vec3]) -> Result<Obb> {
    if points.is_empty() {
        return Err(Error::DegeneratePoints);
    }
    let n = points.len() as f64;
    let mean = points.iter().fold(Vector3::zeros(), |acc, p| acc + p.coords) / n;
    let mut cov = Matrix2::zeros();
    let mut var_z = 0.0;
    for p in points {
        let d = p.coords - mean;
        let dxy = Vector2::new(d.x, d.y);
        cov += dxy * dxy.transpose();
        var_z += d.z * d.z;
    }
    cov /= n;
    var_z /= n;

    let eig = SymmetricEigen::new(cov);
    let (i0, i1) = if eig.eigenvalues[0] >= eig.eigenvalues[1] {
        (0, 1)
    } else {
        (1, 0)
    };
    let (l0, l1) = (eig.eigenvalues[i0].max(0.0), eig.eigenvalues[i1].max(0.0));
    let (u, w) = if l0 - l1 <= TIE_EPS * (l0 + l1) {
        let (ex, ey) = (Vector3::x(), Vector3::y());
        if cov[(0, 0)] >= cov[(1, 1)] {
            (ex, ey)
        } else {
            (ey, ex)
        }
    } else {
        let c0 = eig.eigenvectors.column(i0);
        let c1 = eig.eigenvectors.column(i1);
        (
            canonical_sign(Vector3::new(c0[0], c0[1], 0.0).normalize()),
            canonical_sign(Vector3::new(c1[0], c1[1], 0.0).normalize()),
        )
    };
    let mut axes = [(u, l0), (w, l1), (Vector3::z(), var_z)];
    axes.sort_by(|a, b| b.1.total_cmp(&a.1));

    let mut extents = [0.0; 3];
    let mut center = Vector3::zeros();
    for (k, (axis, _)) in axes.iter().enumerate() {
        let (lo, hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            let t = axis.dot(&p.coords);
            (lo.min(t), hi.max(t))
        });
        extents[k] = hi - lo;
        center += *axis * ((lo + hi) / 2.0);
    }
    Ok(Obb {
        center: Vec3::from(center),
        axes: [axes[0].0, axes[1].0, axes[2].0],
        extents,
        variances: [axes[0].1, axes[1].1, axes[2].1],
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrismInit {
    pub d: f64,
    pub z: f64,
    pub obb: Option<Obb>,
}

/// Initial thickness and depth of one volume.
///
/// Every box side length is a thickness candidate; each is scored with the
/// prism centered on the box, and the cheapest cover plus thickness penalty
/// wins. The depth starts at the mean depth of the points.
pub fn init_prism(polygon: &[Vec2], points: &[Vec3], config: &SolveConfig) -> PrismInit {
    let Ok(obb) = fit_obb(points) else {
        return PrismInit {
            d: config.empty_thickness,
            z: 0.0,
            obb: None,
        };
    };
    let samples = Samples::new(polygon, points);
    let mut best = (f64::INFINITY, config.d_min);
    for &e in &obb.extents {
        let d = e.max(config.d_min);
        let cost = samples.cover(d, obb.center.z) + config.omega * d * d;
        if cost < best.0 {
            best = (cost, d);
        }
    }
    let z = points.iter().map(|p| p.z).sum::<f64>() / points.len() as f64;
    PrismInit {
        d: best.1,
        z,
        obb: Some(obb),
    }
}
