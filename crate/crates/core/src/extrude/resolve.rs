//! Greedy enforcement of equal-depth, depth-order and equal-thickness
//! constraints on an initialized set of prisms.

use std::collections::BTreeSet;

use super::{Prism, Samples};
use crate::constraints::ConstraintSet;
use crate::error::{Error, Result};
use crate::shape::PointSet;

/// Slack used when checking constraints that were enforced by assignment.
pub const FEASIBILITY_EPS: f64 = 1e-9;

pub(crate) struct Layout {
    /// Prism indices of each depth class.
    pub depth: Vec<Vec<usize>>,
    /// Prism indices of each thickness class.
    pub thickness: Vec<Vec<usize>>,
    /// Distinct (front, behind) depth-class pairs.
    pub edges: Vec<(usize, usize)>,
}

impl Layout {
    pub fn new(prisms: &[Prism], cs: &ConstraintSet) -> Result<Layout> {
        if prisms.len() != cs.volumes.len() || prisms.iter().zip(&cs.volumes).any(|(p, v)| p.volume_id() != *v) {
            return Err(Error::Infeasible("prisms do not match the constraint volumes".into()));
        }
        let index = |v| cs.index_of(v).expect("constraint volume");
        let depth: Vec<Vec<usize>> = cs
            .depth_classes
            .iter()
            .map(|c| c.iter().map(|&v| index(v)).collect())
            .collect();
        let thickness = cs
            .thickness_classes
            .iter()
            .map(|c| c.iter().map(|&v| index(v)).collect())
            .collect();
        let mut seen = BTreeSet::new();
        let mut edges = Vec::new();
        for e in &cs.order_edges {
            let pair = (cs.depth_class_of(e.front), cs.depth_class_of(e.behind));
            if seen.insert(pair) {
                edges.push(pair);
            }
        }
        Ok(Layout {
            depth,
            thickness,
            edges,
        })
    }

    pub fn node_cover(&self, node: usize, z: f64, prisms: &[Prism], samples: &[Samples]) -> f64 {
        self.depth[node].iter().map(|&i| samples[i].cover(prisms[i].d, z)).sum()
    }
}

fn argmin(candidates: impl Iterator<Item = f64>, cost: impl Fn(f64) -> f64) -> Option<f64> {
    let mut best: Option<(f64, f64)> = None;
    for c in candidates {
        let v = cost(c);
        if best.is_none_or(|(bv, _)| v < bv) {
            best = Some((v, c));
        }
    }
    best.map(|(_, c)| c)
}

/// Public entry point taking raw points, one set per prism.
pub fn resolve_constraints(
    prisms: &mut [Prism],
    pointsets: &[PointSet],
    constraints: &ConstraintSet,
    omega: f64,
) -> Result<()> {
    let samples: Vec<Samples> = prisms
        .iter()
        .zip(pointsets)
        .map(|(p, s)| Samples::new(&p.polygon, &s.points))
        .collect();
    resolve_with(prisms, &samples, constraints, omega)
}

pub(crate) fn resolve_with(prisms: &mut [Prism], samples: &[Samples], cs: &ConstraintSet, omega: f64) -> Result<()> {
    let layout = Layout::new(prisms, cs)?;
    let delta = cs.order_margin;

    // Equal depth: the member depth with the cheapest summed cover.
    for class in &layout.depth {
        if class.len() < 2 {
            continue;
        }
        let cost = |z: f64| -> f64 { class.iter().map(|&i| samples[i].cover(prisms[i].d, z)).sum() };
        let z = argmin(class.iter().map(|&i| prisms[i].z), cost).expect("non-empty class");
        for &i in class {
            prisms[i].z = z;
        }
    }

    // Depth order on class nodes.
    let mut z: Vec<f64> = layout.depth.iter().map(|c| prisms[c[0]].z).collect();
    let violated = |z: &[f64], (f, b): (usize, usize)| z[f] - z[b] < delta - 1e-12;
    let mut settled = layout.edges.is_empty();
    for _ in 0..=layout.edges.len() {
        if settled {
            break;
        }
        let mut any = false;
        for &(f, b) in &layout.edges {
            if !violated(&z, (f, b)) {
                continue;
            }
            any = true;
            let raise = z[b] + delta;
            let lower = z[f] - delta;
            let cost_raise = layout.node_cover(f, raise, prisms, samples) + layout.node_cover(b, z[b], prisms, samples);
            let cost_lower = layout.node_cover(f, z[f], prisms, samples) + layout.node_cover(b, lower, prisms, samples);
            if cost_raise <= cost_lower {
                z[f] = raise;
            } else {
                z[b] = lower;
            }
        }
        settled = !any || layout.edges.iter().all(|&e| !violated(&z, e));
    }
    if !settled {
        // Greedy moves kept undoing each other; sweep front to back and push
        // every behind node just below its fronts.
        let order = cs
            .topological_order()
            .ok_or_else(|| Error::Infeasible("depth order contains a cycle".into()))?;
        log::debug!("depth order fallback sweep over {} nodes", order.len());
        for &n in &order {
            for &(f, b) in &layout.edges {
                if b == n && violated(&z, (f, b)) {
                    z[b] = z[f] - delta;
                }
            }
        }
    }
    for (node, class) in layout.depth.iter().enumerate() {
        for &i in class {
            prisms[i].z = z[node];
        }
    }

    // Equal thickness: the member thickness with the cheapest class cost.
    for class in &layout.thickness {
        if class.len() < 2 {
            continue;
        }
        let k = class.len() as f64;
        let cost = |d: f64| -> f64 {
            class.iter().map(|&i| samples[i].cover(d, prisms[i].z)).sum::<f64>() + omega * k * d * d
        };
        let d = argmin(class.iter().map(|&i| prisms[i].d), cost).expect("non-empty class");
        for &i in class {
            prisms[i].d = d;
        }
    }

    verify_constraints(prisms, cs)
}

/// Checks every constraint family on finished prisms.
pub fn verify_constraints(prisms: &[Prism], cs: &ConstraintSet) -> Result<()> {
    let layout = Layout::new(prisms, cs)?;
    for class in &layout.depth {
        let z0 = prisms[class[0]].z;
        if let Some(&i) = class.iter().find(|&&i| (prisms[i].z - z0).abs() > FEASIBILITY_EPS) {
            return Err(Error::Infeasible(format!(
                "path {} breaks an equal-depth class",
                prisms[i].path_id
            )));
        }
    }
    for class in &layout.thickness {
        let d0 = prisms[class[0]].d;
        if let Some(&i) = class.iter().find(|&&i| (prisms[i].d - d0).abs() > FEASIBILITY_EPS) {
            return Err(Error::Infeasible(format!(
                "path {} breaks an equal-thickness class",
                prisms[i].path_id
            )));
        }
    }
    for e in &cs.order_edges {
        let f = &prisms[cs.index_of(e.front).expect("volume")];
        let b = &prisms[cs.index_of(e.behind).expect("volume")];
        if f.z - b.z < cs.order_margin - FEASIBILITY_EPS {
            return Err(Error::Infeasible(format!(
                "path {} is not in front of path {}",
                f.path_id, b.path_id
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::{compile_constraints, ConstraintConfig};
    use crate::extrude::tests::unit_prism;
    use crate::geom::Vec3;
    use crate::model::tests::{clipart_of, rect_path};
    use crate::model::Annotation;

    fn setup(ann: &[Annotation], z: [f64; 2], d: [f64; 2]) -> (Vec<Prism>, ConstraintSet) {
        let c = clipart_of(vec![rect_path(0, 0.0, 0.0, 0.4, 0.4), rect_path(1, 0.6, 0.6, 1.0, 1.0)]);
        let cs = compile_constraints(&c, ann, &ConstraintConfig::default()).unwrap();
        let prisms = (0..2)
            .map(|i| {
                let mut p = unit_prism(d[i], z[i]);
                p.path_id = i;
                p
            })
            .collect();
        (prisms, cs)
    }

    fn empty_sets() -> Vec<PointSet> {
        (0..2)
            .map(|i| PointSet {
                path_id: i,
                points: vec![],
            })
            .collect()
    }

    #[test]
    fn order_edge_is_enforced_by_moving_one_endpoint() {
        let ann = [Annotation::DepthOrder { front: 0, behind: 1 }];
        let (mut prisms, cs) = setup(&ann, [0.0, 0.5], [0.1, 0.1]);
        let mut sets = empty_sets();
        sets[0].points = vec![Vec3::new(0.5, 0.5, 0.0); 10];
        resolve_constraints(&mut prisms, &sets, &cs, 0.01).unwrap();
        assert_eq!(prisms[0].z, 0.0);
        assert!((prisms[1].z - -0.01).abs() < 1e-12);
    }

    #[test]
    fn same_thickness_takes_a_member_value() {
        let ann = [Annotation::SameThickness { a: 0, b: 1 }];
        let (mut prisms, cs) = setup(&ann, [0.0, 0.0], [0.1, 0.3]);
        resolve_constraints(&mut prisms, &empty_sets(), &cs, 0.01).unwrap();
        assert_eq!(prisms[0].d, 0.1);
        assert_eq!(prisms[1].d, 0.1);
    }

    #[test]
    fn same_depth_picks_cheapest_member_depth() {
        let ann = [Annotation::SameDepth { a: 0, b: 1 }];
        let (mut prisms, cs) = setup(&ann, [0.0, 1.0], [0.1, 0.1]);
        let mut sets = empty_sets();
        sets[1].points = vec![Vec3::new(0.5, 0.5, 1.0); 3];
        resolve_constraints(&mut prisms, &sets, &cs, 0.01).unwrap();
        assert_eq!(prisms[0].z, 1.0);
        assert_eq!(prisms[1].z, 1.0);
    }

    #[test]
    fn verification_flags_broken_depth_order() {
        let ann = [Annotation::DepthOrder { front: 0, behind: 1 }];
        let (prisms, cs) = setup(&ann, [0.0, 0.0], [0.1, 0.1]);
        assert_eq!(verify_constraints(&prisms, &cs).unwrap_err().code(), "INFEASIBLE");
    }
}
