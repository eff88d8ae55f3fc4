//! Splitting the points of a path that stands for several objects.

use super::{KmeansConfig, Prism};
use crate::constraints::ConstraintSet;
use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::shape::PointSet;

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// One-dimensional k-means. Returns the cluster of each value and the final
/// centers. Seeds sit at the `(k + 0.5) / count` quantiles unless overridden.
pub fn kmeans_1d(values: &[f64], count: usize, config: &KmeansConfig) -> Result<(Vec<usize>, Vec<f64>)> {
    if values.is_empty() || count == 0 {
        return Ok((vec![0; values.len()], vec![0.0; count]));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let quantiles: Vec<f64> = match &config.seed_quantiles {
        Some(q) if q.len() == count => q.clone(),
        Some(q) => {
            return Err(Error::Config(format!(
                "expected {count} seed quantiles, got {}",
                q.len()
            )))
        }
        None => (0..count).map(|k| (k as f64 + 0.5) / count as f64).collect(),
    };
    let mut centers: Vec<f64> = quantiles.iter().map(|&q| quantile(&sorted, q)).collect();
    let mut assign = vec![usize::MAX; values.len()];
    for _ in 0..config.max_iters.max(1) {
        let mut changed = false;
        for (i, &v) in values.iter().enumerate() {
            let mut best = 0;
            for k in 1..count {
                if (v - centers[k]).abs() < (v - centers[best]).abs() {
                    best = k;
                }
            }
            if assign[i] != best {
                assign[i] = best;
                changed = true;
            }
        }
        let mut sum = vec![0.0; count];
        let mut num = vec![0usize; count];
        for (&a, &v) in assign.iter().zip(values) {
            sum[a] += v;
            num[a] += 1;
        }
        for k in 0..count {
            if num[k] > 0 {
                centers[k] = sum[k] / num[k] as f64;
            }
        }
        if !changed {
            break;
        }
    }
    Ok((assign, centers))
}

/// Expands per-path point sets into per-volume sets aligned with
/// `constraints.volumes`. Copies of a path split its points by depth,
/// nearest copy first in ascending z.
pub fn duplicate_paths(
    per_path: &[PointSet],
    constraints: &ConstraintSet,
    config: &KmeansConfig,
) -> Result<Vec<PointSet>> {
    let mut out = Vec::with_capacity(constraints.volumes.len());
    let mut i = 0;
    while i < constraints.volumes.len() {
        let path = constraints.volumes[i].path;
        let count = constraints.copies_of(path);
        let points: &[Vec3] = per_path
            .iter()
            .find(|s| s.path_id == path)
            .map(|s| s.points.as_slice())
            .unwrap_or(&[]);
        if count == 1 {
            out.push(PointSet {
                path_id: path,
                points: points.to_vec(),
            });
        } else {
            if points.len() < count {
                return Err(Error::Cluster {
                    path,
                    count,
                    points: points.len(),
                });
            }
            let z: Vec<f64> = points.iter().map(|p| p.z).collect();
            let (assign, centers) = kmeans_1d(&z, count, config)?;
            let mut order: Vec<usize> = (0..count).collect();
            order.sort_by(|&a, &b| centers[a].total_cmp(&centers[b]));
            for &k in &order {
                out.push(PointSet {
                    path_id: path,
                    points: points
                        .iter()
                        .zip(&assign)
                        .filter(|(_, &a)| a == k)
                        .map(|(p, _)| *p)
                        .collect(),
                });
            }
        }
        i += count;
    }
    Ok(out)
}

/// Copies left without points start at the mean depth of their siblings
/// rather than the global fallback depth.
pub(crate) fn place_empty_copies(prisms: &mut [Prism], pointsets: &[PointSet], constraints: &ConstraintSet) {
    for i in 0..prisms.len() {
        if !pointsets[i].points.is_empty() || constraints.copies_of(prisms[i].path_id) < 2 {
            continue;
        }
        let sib: Vec<f64> = (0..prisms.len())
            .filter(|&j| prisms[j].path_id == prisms[i].path_id && !pointsets[j].points.is_empty())
            .map(|j| prisms[j].z)
            .collect();
        if !sib.is_empty() {
            prisms[i].z = sib.iter().sum::<f64>() / sib.len() as f64;
        }
    }
}
