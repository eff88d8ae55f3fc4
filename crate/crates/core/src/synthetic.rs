//! Ground-truth recovery experiment on random box scenes.
//!
//! Each scene is a handful of axis-aligned boxes with disjoint footprints.
//! Their front-view rectangles become the clipart, points sampled on their
//! surfaces become the guiding shape, and the solver has to recover every
//! box's thickness and depth.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::extrude::{solve, SolveConfig};
use crate::geom::Vec3;
use crate::mask::{rasterize_mask, DEFAULT_MASK_RESOLUTION};
use crate::shape::{filter_by_mask, GuidingShape};
use crate::svg::parse_clipart;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthBox {
    pub min: Vec3,
    pub max: Vec3,
}

impl GroundTruthBox {
    pub fn thickness(&self) -> f64 {
        self.max.z - self.min.z
    }

    pub fn depth(&self) -> f64 {
        (self.max.z + self.min.z) / 2.0
    }

    fn faces(&self) -> [(f64, usize, f64); 6] {
        let e = self.max - self.min;
        // (area, fixed axis, fixed value)
        [
            (e.y * e.z, 0, self.min.x),
            (e.y * e.z, 0, self.max.x),
            (e.x * e.z, 1, self.min.y),
            (e.x * e.z, 1, self.max.y),
            (e.x * e.y, 2, self.min.z),
            (e.x * e.y, 2, self.max.z),
        ]
    }

    fn corners(&self) -> impl Iterator<Item = Vec3> + '_ {
        (0..8).map(move |k| {
            Vec3::new(
                if k & 1 == 0 { self.min.x } else { self.max.x },
                if k & 2 == 0 { self.min.y } else { self.max.y },
                if k & 4 == 0 { self.min.z } else { self.max.z },
            )
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub boxes: Vec<GroundTruthBox>,
    /// Box corners followed by area-weighted surface samples.
    pub points: Vec<Vec3>,
    /// Front-view footprints as an SVG document, one rect per box.
    pub svg: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoundtripConfig {
    pub scenes: usize,
    pub seed: u64,
    pub min_boxes: usize,
    pub max_boxes: usize,
    pub samples: usize,
    pub d_tolerance: f64,
    pub z_tolerance: f64,
    pub required_fraction: f64,
    pub solve: SolveConfig,
}

impl Default for RoundtripConfig {
    fn default() -> Self {
        RoundtripConfig {
            scenes: 20,
            seed: 7,
            min_boxes: 2,
            max_boxes: 6,
            samples: 4000,
            d_tolerance: 0.10,
            z_tolerance: 0.05,
            required_fraction: 0.90,
            solve: SolveConfig::default(),
        }
    }
}

/// Random boxes placed in distinct cells of a 3 x 2 grid.
pub fn generate_scene(rng: &mut impl Rng, boxes: usize, samples: usize) -> SyntheticScene {
    let boxes = boxes.clamp(1, 6);
    let mut cells: Vec<usize> = (0..6).collect();
    for i in (1..cells.len()).rev() {
        cells.swap(i, rng.random_range(0..=i));
    }
    let (cw, ch) = (1.0 / 3.0, 1.0 / 2.0);
    let mut out = Vec::with_capacity(boxes);
    for &cell in cells.iter().take(boxes) {
        let (cx, cy) = ((cell % 3) as f64 * cw, (cell / 3) as f64 * ch);
        let w = rng.random_range(0.35..0.85) * cw;
        let h = rng.random_range(0.35..0.85) * ch;
        let x0 = cx + rng.random_range(0.05..(0.95 - w / cw).max(0.06)) * cw;
        let y0 = cy + rng.random_range(0.05..(0.95 - h / ch).max(0.06)) * ch;
        let d = rng.random_range(0.05..0.35);
        let z = rng.random_range(-0.25..0.25);
        out.push(GroundTruthBox {
            min: Vec3::new(x0, y0, z - d / 2.0),
            max: Vec3::new(x0 + w, y0 + h, z + d / 2.0),
        });
    }

    let mut points: Vec<Vec3> = out.iter().flat_map(|b| b.corners().collect::<Vec<_>>()).collect();
    let faces: Vec<(usize, (f64, usize, f64))> = out
        .iter()
        .enumerate()
        .flat_map(|(i, b)| b.faces().into_iter().map(move |f| (i, f)))
        .collect();
    let total: f64 = faces.iter().map(|(_, f)| f.0).sum();
    for _ in 0..samples {
        let mut pick = rng.random_range(0.0..total);
        let mut chosen = faces.len() - 1;
        for (k, (_, f)) in faces.iter().enumerate() {
            if pick < f.0 {
                chosen = k;
                break;
            }
            pick -= f.0;
        }
        let (bi, (_, axis, value)) = faces[chosen];
        let b = &out[bi];
        let mut p = Vec3::new(
            rng.random_range(b.min.x..=b.max.x),
            rng.random_range(b.min.y..=b.max.y),
            rng.random_range(b.min.z..=b.max.z),
        );
        p[axis] = value;
        points.push(p);
    }

    let mut svg = String::from(r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 1 1">"#);
    for (i, b) in out.iter().enumerate() {
        let shade = 40 + (i * 37) % 200;
        let _ = write!(
            svg,
            r##"<rect x="{}" y="{}" width="{}" height="{}" fill="#{:02x}{:02x}{:02x}"/>"##,
            b.min.x,
            1.0 - b.max.y,
            b.max.x - b.min.x,
            b.max.y - b.min.y,
            shade,
            255 - shade,
            (shade * 3) % 256
        );
    }
    svg.push_str("</svg>");
    SyntheticScene {
        boxes: out,
        points,
        svg,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeResult {
    pub scene: usize,
    pub path_id: usize,
    pub d_true: f64,
    pub d_found: f64,
    pub z_true: f64,
    pub z_found: f64,
    pub d_rel_error: f64,
    pub z_abs_error: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundtripReport {
    pub volumes: Vec<VolumeResult>,
    pub recovered: usize,
    pub fraction: f64,
    pub required_fraction: f64,
    pub passed: bool,
}

impl RoundtripReport {
    pub fn table(&self) -> String {
        let mut out = String::from("scene path   d_true  d_found  d_err   z_true  z_found  z_err  ok\n");
        for v in &self.volumes {
            let _ = writeln!(
                out,
                "{:>5} {:>4} {:>8.4} {:>8.4} {:>6.3} {:>8.4} {:>8.4} {:>6.4}  {}",
                v.scene,
                v.path_id,
                v.d_true,
                v.d_found,
                v.d_rel_error,
                v.z_true,
                v.z_found,
                v.z_abs_error,
                if v.ok { "yes" } else { "NO" }
            );
        }
        let _ = writeln!(
            out,
            "recovered {}/{} volumes ({:.1}%, need {:.1}%): {}",
            self.recovered,
            self.volumes.len(),
            100.0 * self.fraction,
            100.0 * self.required_fraction,
            if self.passed { "PASS" } else { "FAIL" }
        );
        out
    }
}

/// Generates the scenes, solves each through the regular pipeline and
/// compares against ground truth in the normalized frame.
pub fn run_roundtrip(config: &RoundtripConfig) -> Result<RoundtripReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut volumes = Vec::new();
    for scene_idx in 0..config.scenes {
        let n = rng.random_range(config.min_boxes..=config.max_boxes.max(config.min_boxes));
        let scene = generate_scene(&mut rng, n, config.samples);
        let clipart = parse_clipart(scene.svg.as_bytes())?;
        let target = clipart.geometry_bounds();
        let shape = GuidingShape::from_points(scene.points.clone()).align_to(&target)?;
        // Ground truth goes through the same similarity as the samples.
        let corners: Vec<Vec3> = scene
            .boxes
            .iter()
            .flat_map(|b| b.corners().collect::<Vec<_>>())
            .collect();
        let truth = GuidingShape::from_points(corners).align_to(&target)?;
        let mask = rasterize_mask(&clipart, DEFAULT_MASK_RESOLUTION)?;
        let filtered = filter_by_mask(&shape, &mask)?;
        let solution = solve(&clipart, &filtered, &[], &config.solve)?;
        for (i, _) in scene.boxes.iter().enumerate() {
            let tc = &truth.vertices[8 * i..8 * i + 8];
            let (zlo, zhi) = (tc[0].z, tc[7].z);
            let (d_true, z_true) = (zhi - zlo, (zhi + zlo) / 2.0);
            let prism = solution.prism(i, 0).expect("one prism per box");
            let d_rel_error = (prism.d - d_true).abs() / d_true;
            let z_abs_error = (prism.z - z_true).abs();
            volumes.push(VolumeResult {
                scene: scene_idx,
                path_id: i,
                d_true,
                d_found: prism.d,
                z_true,
                z_found: prism.z,
                d_rel_error,
                z_abs_error,
                ok: d_rel_error <= config.d_tolerance && z_abs_error <= config.z_tolerance,
            });
        }
    }
    let recovered = volumes.iter().filter(|v| v.ok).count();
    let fraction = if volumes.is_empty() {
        0.0
    } else {
        recovered as f64 / volumes.len() as f64
    };
    Ok(RoundtripReport {
        recovered,
        fraction,
        required_fraction: config.required_fraction,
        passed: !volumes.is_empty() && fraction >= config.required_fraction,
        volumes,
    })
}
