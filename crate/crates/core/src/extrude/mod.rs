//! Extrusion of clipart paths into prisms that cover a guiding shape.
//!
//! Each geometry path becomes one or more prisms with a thickness `d` and a
//! depth `z`. The objective is the summed distance of the guiding points to
//! their prism plus `omega` times the summed squared thickness.

pub mod cluster;
pub mod obb;
pub mod refine;
pub mod resolve;

use serde::{Deserialize, Serialize};

use crate::constraints::{compile_constraints, ConstraintConfig, ConstraintSet, VolumeId};
use crate::error::{Error, Result};
use crate::geom::{boundary_distance, point_in_polygon, Bounds2, Vec2, Vec3};
use crate::model::{validate_clipart, Annotation, Clipart, Rgba};
use crate::shape::{enclosed_points, GuidingShape, PointSet};

pub use cluster::{duplicate_paths, kmeans_1d};
pub use obb::{fit_obb, init_prism, Obb, PrismInit};
pub use refine::refine_local;
pub use resolve::{resolve_constraints, verify_constraints};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prism {
    pub path_id: usize,
    /// Duplicate index for paths expanded into several objects.
    pub copy: usize,
    pub polygon: Vec<Vec2>,
    pub fill: Rgba,
    pub d: f64,
    pub z: f64,
}

impl Prism {
    pub fn volume_id(&self) -> VolumeId {
        VolumeId::new(self.path_id, self.copy)
    }

    pub fn z_min(&self) -> f64 {
        self.z - self.d / 2.0
    }

    pub fn z_max(&self) -> f64 {
        self.z + self.d / 2.0
    }

    pub fn footprint(&self) -> Bounds2 {
        Bounds2::of(&self.polygon)
    }
}

/// Distance from `a` (planar distance outside the footprint, 0 inside) and
/// `b` (signed distance past the nearer cap).
#[inline]
pub(crate) fn combine(a: f64, b: f64) -> f64 {
    let b = b.max(0.0);
    if a == 0.0 {
        b
    } else {
        a.hypot(b)
    }
}

/// Euclidean distance from a point to the closed prism; 0 inside.
pub fn prism_distance(x: &Vec3, prism: &Prism) -> f64 {
    let q = Vec2::new(x.x, x.y);
    let a = if point_in_polygon(&q, &prism.polygon) {
        0.0
    } else {
        boundary_distance(&q, &prism.polygon)
    };
    combine(a, (x.z - prism.z).abs() - prism.d / 2.0)
}

pub fn cover_cost(prism: &Prism, points: &[Vec3]) -> f64 {
    points.iter().map(|x| prism_distance(x, prism)).sum()
}

pub fn thickness_cost(prisms: &[Prism]) -> f64 {
    prisms.iter().map(|p| p.d * p.d).sum()
}

/// Points of one volume with the planar part of their distance precomputed,
/// so cover can be re-evaluated for any `(d, z)` cheaply.
#[derive(Debug, Clone, Default)]
pub(crate) struct Samples {
    planar: Vec<f64>,
    z: Vec<f64>,
}

impl Samples {
    pub(crate) fn new(polygon: &[Vec2], points: &[Vec3]) -> Self {
        let mut planar = Vec::with_capacity(points.len());
        let mut z = Vec::with_capacity(points.len());
        for x in points {
            let q = Vec2::new(x.x, x.y);
            planar.push(if point_in_polygon(&q, polygon) {
                0.0
            } else {
                boundary_distance(&q, polygon)
            });
            z.push(x.z);
        }
        Samples { planar, z }
    }

    pub(crate) fn cover(&self, d: f64, zc: f64) -> f64 {
        self.planar
            .iter()
            .zip(&self.z)
            .map(|(&a, &z)| combine(a, (z - zc).abs() - d / 2.0))
            .sum()
    }

    pub(crate) fn z_range(&self) -> Option<(f64, f64)> {
        if self.z.is_empty() {
            return None;
        }
        Some(self.z.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &z| {
            (lo.min(z), hi.max(z))
        }))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefineConfig {
    pub enabled: bool,
    pub max_iters: usize,
    /// Relative improvement below which a sweep ends the descent.
    pub tolerance: f64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            enabled: false,
            max_iters: 20,
            tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KmeansConfig {
    pub max_iters: usize,
    /// Seed positions as quantiles of the sorted depths, one per copy.
    pub seed_quantiles: Option<Vec<f64>>,
}

impl Default for KmeansConfig {
    fn default() -> Self {
        KmeansConfig {
            max_iters: 50,
            seed_quantiles: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    pub omega: f64,
    pub order_margin: f64,
    pub d_min: f64,
    pub layering_defaults: bool,
    /// Thickness given to a volume that encloses no guiding points.
    pub empty_thickness: f64,
    pub refine: RefineConfig,
    pub kmeans: KmeansConfig,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            omega: 0.01,
            order_margin: 0.01,
            d_min: 1e-3,
            layering_defaults: true,
            empty_thickness: 0.05,
            refine: RefineConfig::default(),
            kmeans: KmeansConfig::default(),
        }
    }
}

impl SolveConfig {
    pub fn from_json(text: &str) -> Result<SolveConfig> {
        let cfg: SolveConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::Config(format!("{what} out of range: {v}")));
        if !(self.omega.is_finite() && self.omega >= 0.0) {
            return bad("omega", self.omega);
        }
        if !(self.order_margin.is_finite() && self.order_margin >= 0.0) {
            return bad("order_margin", self.order_margin);
        }
        if !(self.d_min.is_finite() && self.d_min > 0.0) {
            return bad("d_min", self.d_min);
        }
        if !(self.empty_thickness.is_finite() && self.empty_thickness >= self.d_min) {
            return bad("empty_thickness", self.empty_thickness);
        }
        if !(self.refine.tolerance.is_finite() && self.refine.tolerance >= 0.0) {
            return bad("refine.tolerance", self.refine.tolerance);
        }
        if let Some(q) = &self.kmeans.seed_quantiles {
            if let Some(v) = q.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return bad("kmeans.seed_quantiles", *v);
            }
        }
        Ok(())
    }

    pub fn constraint_config(&self) -> ConstraintConfig {
        ConstraintConfig {
            order_margin: self.order_margin,
            layering_defaults: self.layering_defaults,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtrusionSolution {
    pub prisms: Vec<Prism>,
    pub omega: f64,
    pub order_margin: f64,
    pub cover_cost: f64,
    pub thickness_cost: f64,
    pub total_cost: f64,
    /// Cover term of each prism, aligned with `prisms`.
    pub prism_cover: Vec<f64>,
    /// Number of guiding points assigned to each prism.
    pub prism_samples: Vec<usize>,
}

impl ExtrusionSolution {
    /// Builds a solution and caches its cost terms.
    pub fn evaluate(prisms: Vec<Prism>, pointsets: &[PointSet], omega: f64, order_margin: f64) -> Self {
        assert_eq!(prisms.len(), pointsets.len(), "one point set per prism");
        let prism_cover: Vec<f64> = prisms
            .iter()
            .zip(pointsets)
            .map(|(p, s)| cover_cost(p, &s.points))
            .collect();
        let cover: f64 = prism_cover.iter().sum();
        let thick = thickness_cost(&prisms);
        ExtrusionSolution {
            prism_samples: pointsets.iter().map(|s| s.points.len()).collect(),
            prisms,
            omega,
            order_margin,
            cover_cost: cover,
            thickness_cost: thick,
            total_cost: cover + omega * thick,
            prism_cover,
        }
    }

    pub fn prism(&self, path_id: usize, copy: usize) -> Option<&Prism> {
        self.prisms.iter().find(|p| p.path_id == path_id && p.copy == copy)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("solution serializes")
    }

    pub fn from_json(text: &str) -> Result<ExtrusionSolution> {
        let s: ExtrusionSolution =
            serde_json::from_str(text).map_err(|e| Error::parse("solution json", e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        for p in &self.prisms {
            let finite =
                p.d.is_finite() && p.z.is_finite() && p.polygon.iter().all(|v| v.x.is_finite() && v.y.is_finite());
            if !finite || p.d <= 0.0 || p.polygon.len() < 3 {
                return Err(Error::Degenerate(format!(
                    "prism for path {} copy {} is malformed",
                    p.path_id, p.copy
                )));
            }
        }
        Ok(())
    }
}

/// Recomputes the objective of `solution` against explicit point sets, one
/// per prism in the same order.
///
/// # Panics
/// When the number of point sets differs from the number of prisms.
pub fn total_cost(solution: &ExtrusionSolution, pointsets: &[PointSet]) -> f64 {
    assert_eq!(solution.prisms.len(), pointsets.len(), "one point set per prism");
    let cover: f64 = solution
        .prisms
        .iter()
        .zip(pointsets)
        .map(|(p, s)| cover_cost(p, &s.points))
        .sum();
    cover + solution.omega * thickness_cost(&solution.prisms)
}

/// Everything produced along the way to a solution.
#[derive(Debug, Clone)]
pub struct SolveOutput {
    pub solution: ExtrusionSolution,
    /// Per-prism points after duplication, aligned with the prisms.
    pub pointsets: Vec<PointSet>,
    pub constraints: ConstraintSet,
}

pub fn solve(
    clipart: &Clipart,
    shape: &GuidingShape,
    annotations: &[Annotation],
    config: &SolveConfig,
) -> Result<ExtrusionSolution> {
    solve_detailed(clipart, shape, annotations, config).map(|o| o.solution)
}

/// Runs the full pipeline on an aligned guiding shape.
pub fn solve_detailed(
    clipart: &Clipart,
    shape: &GuidingShape,
    annotations: &[Annotation],
    config: &SolveConfig,
) -> Result<SolveOutput> {
    config.validate()?;
    let report = validate_clipart(clipart);
    if let Some(v) = report.violations.first() {
        return Err(Error::Degenerate(format!("path {}: {}", v.path_id, v.kind)));
    }
    let per_path = enclosed_points(shape, clipart);
    // Reject oversized splits before compiling count x count order edges.
    for ann in annotations {
        if let Annotation::MultipleObjects { path, count } = *ann {
            if let Some(set) = per_path.iter().find(|s| s.path_id == path) {
                if count >= 2 && set.points.len() < count {
                    return Err(Error::Cluster {
                        path,
                        count,
                        points: set.points.len(),
                    });
                }
            }
        }
    }
    let constraints = compile_constraints(clipart, annotations, &config.constraint_config())?;
    if constraints.volumes.is_empty() {
        return Err(Error::EmptyDocument);
    }
    let pointsets = duplicate_paths(&per_path, &constraints, &config.kmeans)?;

    let mut prisms = Vec::with_capacity(constraints.volumes.len());
    for (vol, set) in constraints.volumes.iter().zip(&pointsets) {
        let path = clipart.path(vol.path).ok_or(Error::BadReference(vol.path))?;
        let init = init_prism(&path.polygon, &set.points, config);
        prisms.push(Prism {
            path_id: vol.path,
            copy: vol.copy,
            polygon: path.polygon.clone(),
            fill: path.fill,
            d: init.d,
            z: init.z,
        });
    }
    cluster::place_empty_copies(&mut prisms, &pointsets, &constraints);

    let samples: Vec<Samples> = prisms
        .iter()
        .zip(&pointsets)
        .map(|(p, s)| Samples::new(&p.polygon, &s.points))
        .collect();
    resolve::resolve_with(&mut prisms, &samples, &constraints, config.omega)?;
    if config.refine.enabled {
        refine::refine_with(&mut prisms, &samples, &constraints, config)?;
    }
    verify_constraints(&prisms, &constraints)?;

    let solution = ExtrusionSolution::evaluate(prisms, &pointsets, config.omega, config.order_margin);
    log::debug!(
        "solved {} prisms: cover {:.6}, thickness {:.6}, total {:.6}",
        solution.prisms.len(),
        solution.cover_cost,
        solution.thickness_cost,
        solution.total_cost
    );
    Ok(SolveOutput {
        solution,
        pointsets,
        constraints,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::model::tests::{clipart_of, rect_path};

    pub fn unit_prism(d: f64, z: f64) -> Prism {
        Prism {
            path_id: 0,
            copy: 0,
            polygon: vec![
                Vec2::new(0.0, 0.0),
                Vec2::new(1.0, 0.0),
                Vec2::new(1.0, 1.0),
                Vec2::new(0.0, 1.0),
            ],
            fill: Rgba::BLACK,
            d,
            z,
        }
    }

    /// Points on a regular grid over the surface of an axis-aligned box.
    pub fn box_surface(min: Vec3, max: Vec3, n: usize) -> Vec<Vec3> {
        let mut pts = Vec::new();
        let lerp = |a: f64, b: f64, k: usize| a + (b - a) * (k as f64 + 0.5) / n as f64;
        for i in 0..n {
            for j in 0..n {
                let (x, y, z) = (lerp(min.x, max.x, i), lerp(min.y, max.y, j), lerp(min.z, max.z, j));
                let yz = lerp(min.y, max.y, i);
                pts.push(Vec3::new(x, y, min.z));
                pts.push(Vec3::new(x, y, max.z));
                pts.push(Vec3::new(x, min.y, z));
                pts.push(Vec3::new(x, max.y, z));
                pts.push(Vec3::new(min.x, yz, z));
                pts.push(Vec3::new(max.x, yz, z));
            }
        }
        pts
    }

    #[test]
    fn distance_examples() {
        let p = unit_prism(1.0, 0.0);
        assert_eq!(prism_distance(&Vec3::new(0.5, 0.5, 0.0), &p), 0.0);
        assert!((prism_distance(&Vec3::new(0.5, 0.5, 2.0), &p) - 1.5).abs() < 1e-12);
        assert!((prism_distance(&Vec3::new(2.0, 0.5, 0.0), &p) - 1.0).abs() < 1e-12);
        assert!((prism_distance(&Vec3::new(2.0, 2.0, 1.5), &p) - 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn cost_decomposition() {
        let a = unit_prism(0.4, 0.0);
        let mut b = unit_prism(0.2, 1.0);
        b.path_id = 1;
        let sets = vec![
            PointSet {
                path_id: 0,
                points: vec![Vec3::new(0.5, 0.5, 0.5)],
            },
            PointSet {
                path_id: 1,
                points: vec![Vec3::new(0.5, 0.5, 1.0)],
            },
        ];
        let s = ExtrusionSolution::evaluate(vec![a, b], &sets, 0.01, 0.01);
        assert!((s.cover_cost - 0.3).abs() < 1e-12);
        assert!((s.thickness_cost - 0.2).abs() < 1e-12);
        assert!((s.total_cost - (0.3 + 0.01 * 0.2)).abs() < 1e-12);
        assert!((total_cost(&s, &sets) - s.total_cost).abs() < 1e-12);
    }

    #[test]
    fn cached_samples_match_direct_distance() {
        let p = unit_prism(0.3, 0.1);
        let pts = vec![
            Vec3::new(0.5, 0.5, 0.9),
            Vec3::new(1.5, -0.2, 0.0),
            Vec3::new(-0.3, 0.4, -0.8),
            Vec3::new(0.2, 0.2, 0.1),
        ];
        let s = Samples::new(&p.polygon, &pts);
        assert_eq!(s.cover(p.d, p.z), cover_cost(&p, &pts));
    }

    #[test]
    fn config_rejects_unknown_and_bad_values() {
        assert!(SolveConfig::from_json(r#"{"omega": 0.5, "refine": {"enabled": true}}"#).is_ok());
        assert_eq!(
            SolveConfig::from_json(r#"{"omeg": 1}"#).unwrap_err().code(),
            "CONFIG_ERROR"
        );
        assert_eq!(
            SolveConfig::from_json(r#"{"d_min": 0}"#).unwrap_err().code(),
            "CONFIG_ERROR"
        );
    }

    #[test]
    fn single_box_is_recovered() {
        let c = clipart_of(vec![rect_path(0, 0.2, 0.3, 0.6, 0.7)]);
        let pts = box_surface(Vec3::new(0.2, 0.3, 0.1), Vec3::new(0.6, 0.7, 0.3), 12);
        let sol = solve(&c, &GuidingShape::from_points(pts), &[], &SolveConfig::default()).unwrap();
        let p = &sol.prisms[0];
        assert!((p.d - 0.2).abs() < 1e-9, "{}", p.d);
        assert!((p.z - 0.2).abs() < 1e-9, "{}", p.z);
    }

    #[test]
    fn solution_json_roundtrip() {
        let c = clipart_of(vec![rect_path(0, 0.2, 0.3, 0.6, 0.7)]);
        let pts = box_surface(Vec3::new(0.2, 0.3, 0.0), Vec3::new(0.6, 0.7, 0.1), 5);
        let sol = solve(&c, &GuidingShape::from_points(pts), &[], &SolveConfig::default()).unwrap();
        assert_eq!(ExtrusionSolution::from_json(&sol.to_json()).unwrap(), sol);
    }

    #[test]
    fn empty_point_set_uses_fallback() {
        let c = clipart_of(vec![rect_path(0, 0.0, 0.0, 0.4, 0.4)]);
        let pts = vec![Vec3::new(0.9, 0.9, 0.5)];
        let sol = solve(&c, &GuidingShape::from_points(pts), &[], &SolveConfig::default()).unwrap();
        assert_eq!(sol.prisms[0].d, 0.05);
        assert_eq!(sol.prisms[0].z, 0.0);
    }
}
