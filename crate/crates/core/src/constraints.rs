//! Compiles structural annotations into equality classes and depth-order edges
//! over extruded volumes.
//!
//! A volume is one copy of a geometry path; paths annotated as multiple objects
//! expand into several copies. Pairwise annotations on such a path apply to
//! every copy.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom;
use crate::model::{geometry_paths, Annotation, Clipart};

/// Overlap area below which two outlines are treated as disjoint.
const OVERLAP_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VolumeId {
    pub path: usize,
    pub copy: usize,
}

impl VolumeId {
    pub fn new(path: usize, copy: usize) -> Self {
        VolumeId { path, copy }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeSource {
    User,
    Layering,
}

/// `front` must end up strictly in front of (larger z than) `behind`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderEdge {
    pub front: VolumeId,
    pub behind: VolumeId,
    pub source: EdgeSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConstraintConfig {
    pub order_margin: f64,
    pub layering_defaults: bool,
}

impl Default for ConstraintConfig {
    fn default() -> Self {
        ConstraintConfig {
            order_margin: 0.01,
            layering_defaults: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSet {
    /// Every volume, grouped by path in document order.
    pub volumes: Vec<VolumeId>,
    /// Partition of `volumes` into equal-thickness classes, singletons included.
    pub thickness_classes: Vec<Vec<VolumeId>>,
    /// Partition of `volumes` into equal-depth classes, singletons included.
    pub depth_classes: Vec<Vec<VolumeId>>,
    pub order_edges: Vec<OrderEdge>,
    pub order_margin: f64,
}

struct DisjointSets {
    parent: Vec<usize>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        DisjointSets {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Smaller index stays the root so class order is deterministic.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }

    fn classes(&mut self) -> Vec<Vec<usize>> {
        let mut by_root: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for i in 0..self.parent.len() {
            let r = self.find(i);
            by_root.entry(r).or_default().push(i);
        }
        by_root.into_values().collect()
    }
}

impl ConstraintSet {
    pub fn index_of(&self, v: VolumeId) -> Option<usize> {
        self.volumes.iter().position(|&u| u == v)
    }

    pub fn copies_of(&self, path: usize) -> usize {
        self.volumes.iter().filter(|v| v.path == path).count()
    }

    pub fn depth_class_of(&self, v: VolumeId) -> usize {
        self.depth_classes
            .iter()
            .position(|c| c.contains(&v))
            .expect("volume belongs to a depth class")
    }

    pub fn thickness_class_of(&self, v: VolumeId) -> usize {
        self.thickness_classes
            .iter()
            .position(|c| c.contains(&v))
            .expect("volume belongs to a thickness class")
    }

    /// Depth classes ordered so every edge points from an earlier (front) class
    /// to a later one, or `None` when the edges contain a cycle.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let n = self.depth_classes.len();
        let mut indeg = vec![0usize; n];
        let mut succ: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        for e in &self.order_edges {
            let (f, b) = (self.depth_class_of(e.front), self.depth_class_of(e.behind));
            if f == b {
                return None;
            }
            if succ[f].insert(b) {
                indeg[b] += 1;
            }
        }
        let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(&i) = ready.iter().next() {
            ready.remove(&i);
            order.push(i);
            for &j in &succ[i] {
                indeg[j] -= 1;
                if indeg[j] == 0 {
                    ready.insert(j);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    /// Distinct path-level `(front, behind)` pairs, sorted.
    pub fn path_edges(&self) -> Vec<(usize, usize)> {
        let set: BTreeSet<(usize, usize)> = self.order_edges.iter().map(|e| (e.front.path, e.behind.path)).collect();
        set.into_iter().collect()
    }

    /// Annotations that recompile to this same set of classes and edges.
    pub fn implied_annotations(&self) -> Vec<Annotation> {
        let mut out = Vec::new();
        let mut copies: BTreeMap<usize, usize> = BTreeMap::new();
        for v in &self.volumes {
            *copies.entry(v.path).or_default() += 1;
        }
        for (&path, &count) in &copies {
            if count > 1 {
                out.push(Annotation::MultipleObjects { path, count });
            }
        }
        let chain = |classes: &[Vec<VolumeId>], make: fn(usize, usize) -> Annotation| {
            let mut anns = Vec::new();
            for class in classes {
                let paths: BTreeSet<usize> = class.iter().map(|v| v.path).collect();
                let paths: Vec<usize> = paths.into_iter().collect();
                for w in paths.windows(2) {
                    anns.push(make(w[0], w[1]));
                }
            }
            anns
        };
        out.extend(chain(&self.thickness_classes, |a, b| Annotation::SameThickness {
            a,
            b,
        }));
        out.extend(chain(&self.depth_classes, |a, b| Annotation::SameDepth { a, b }));
        out.extend(
            self.path_edges()
                .into_iter()
                .map(|(front, behind)| Annotation::DepthOrder { front, behind }),
        );
        out
    }
}

fn class_reaches(succ: &BTreeMap<usize, BTreeSet<usize>>, from: usize, to: usize) -> bool {
    let mut stack = vec![from];
    let mut seen = BTreeSet::new();
    while let Some(n) = stack.pop() {
        if n == to {
            return true;
        }
        if seen.insert(n) {
            if let Some(s) = succ.get(&n) {
                stack.extend(s.iter().copied());
            }
        }
    }
    false
}

fn find_cycle(succ: &BTreeMap<usize, BTreeSet<usize>>) -> Option<Vec<usize>> {
    fn visit(
        n: usize,
        succ: &BTreeMap<usize, BTreeSet<usize>>,
        done: &mut BTreeSet<usize>,
        stack: &mut Vec<usize>,
    ) -> Option<Vec<usize>> {
        if let Some(pos) = stack.iter().position(|&s| s == n) {
            return Some(stack[pos..].to_vec());
        }
        if done.contains(&n) {
            return None;
        }
        stack.push(n);
        for &m in succ.get(&n).into_iter().flatten() {
            if let Some(c) = visit(m, succ, done, stack) {
                return Some(c);
            }
        }
        stack.pop();
        done.insert(n);
        None
    }
    let mut done = BTreeSet::new();
    for &n in succ.keys() {
        if let Some(c) = visit(n, succ, &mut done, &mut Vec::new()) {
            return Some(c);
        }
    }
    None
}

/// Turns annotations into a [`ConstraintSet`].
///
/// User depth orders are applied first; layering defaults between overlapping
/// paths (higher layer in front) follow, skipped whenever the pair already has
/// a user order, shares a depth class, or would close a cycle.
pub fn compile_constraints(
    clipart: &Clipart,
    annotations: &[Annotation],
    config: &ConstraintConfig,
) -> Result<ConstraintSet> {
    if !(config.order_margin >= 0.0 && config.order_margin.is_finite()) {
        return Err(Error::Config(format!(
            "order margin must be non-negative, got {}",
            config.order_margin
        )));
    }
    let geometry = geometry_paths(clipart);
    let geometry_ids: BTreeSet<usize> = geometry.iter().map(|p| p.id).collect();

    let mut copies: BTreeMap<usize, usize> = geometry_ids.iter().map(|&id| (id, 1)).collect();
    let mut multi_seen = BTreeSet::new();
    for ann in annotations {
        for id in ann.referenced() {
            if !geometry_ids.contains(&id) {
                return Err(Error::BadReference(id));
            }
        }
        match *ann {
            Annotation::MultipleObjects { path, count } => {
                if count < 2 {
                    return Err(Error::InvalidAnnotation(format!(
                        "multiple objects on path {path} needs count >= 2, got {count}"
                    )));
                }
                if !multi_seen.insert(path) {
                    return Err(Error::InvalidAnnotation(format!(
                        "path {path} annotated as multiple objects more than once"
                    )));
                }
                copies.insert(path, count);
            }
            Annotation::SameThickness { a, b } | Annotation::SameDepth { a, b } if a == b => {
                return Err(Error::InvalidAnnotation(format!(
                    "pairwise annotation relates path {a} to itself"
                )));
            }
            Annotation::DepthOrder { front, behind } if front == behind => {
                return Err(Error::Cycle(vec![front]));
            }
            _ => {}
        }
    }

    // Volume order follows document order of the geometry paths.
    let volumes: Vec<VolumeId> = geometry
        .iter()
        .flat_map(|p| (0..copies[&p.id]).map(move |c| VolumeId::new(p.id, c)))
        .collect();
    let index: BTreeMap<VolumeId, usize> = volumes.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let vols_of = |path: usize| -> Vec<usize> { (0..copies[&path]).map(|c| index[&VolumeId::new(path, c)]).collect() };

    let mut thick = DisjointSets::new(volumes.len());
    let mut depth = DisjointSets::new(volumes.len());
    for p in &geometry {
        let vs = vols_of(p.id);
        for w in vs.windows(2) {
            thick.union(w[0], w[1]);
        }
    }
    for ann in annotations {
        match *ann {
            Annotation::SameThickness { a, b } => {
                let (va, vb) = (vols_of(a), vols_of(b));
                for &x in va.iter().chain(&vb) {
                    thick.union(va[0], x);
                }
            }
            Annotation::SameDepth { a, b } => {
                let (va, vb) = (vols_of(a), vols_of(b));
                for &x in va.iter().chain(&vb) {
                    depth.union(va[0], x);
                }
            }
            _ => {}
        }
    }

    let mut edges: Vec<OrderEdge> = Vec::new();
    let mut path_pairs: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut succ: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    let push_pair = |front: usize,
                     behind: usize,
                     source: EdgeSource,
                     edges: &mut Vec<OrderEdge>,
                     succ: &mut BTreeMap<usize, BTreeSet<usize>>,
                     depth: &mut DisjointSets| {
        for &f in &vols_of(front) {
            for &b in &vols_of(behind) {
                edges.push(OrderEdge {
                    front: volumes[f],
                    behind: volumes[b],
                    source,
                });
                let (rf, rb) = (depth.find(f), depth.find(b));
                succ.entry(rf).or_default().insert(rb);
            }
        }
    };

    for ann in annotations {
        if let Annotation::DepthOrder { front, behind } = *ann {
            if !path_pairs.insert((front, behind)) {
                continue;
            }
            let conflict = vols_of(front)
                .iter()
                .any(|&f| vols_of(behind).iter().any(|&b| depth.find(f) == depth.find(b)));
            if conflict {
                return Err(Error::Conflict { front, behind });
            }
            push_pair(front, behind, EdgeSource::User, &mut edges, &mut succ, &mut depth);
        }
    }
    if let Some(cycle) = find_cycle(&succ) {
        let mut ids: Vec<usize> = cycle.iter().map(|&r| volumes[r].path).collect();
        ids.dedup();
        return Err(Error::Cycle(ids));
    }

    if config.layering_defaults {
        for (i, pa) in geometry.iter().enumerate() {
            for pb in &geometry[i + 1..] {
                if pa.layer == pb.layer {
                    continue;
                }
                let (front, behind) = if pa.layer > pb.layer { (pa, pb) } else { (pb, pa) };
                if path_pairs.contains(&(front.id, behind.id)) || path_pairs.contains(&(behind.id, front.id)) {
                    continue;
                }
                if geom::overlap_area(&front.polygon, &behind.polygon) <= OVERLAP_EPS {
                    continue;
                }
                let fv = vols_of(front.id);
                let bv = vols_of(behind.id);
                let blocked = fv.iter().any(|&f| {
                    bv.iter().any(|&b| {
                        let (rf, rb) = (depth.find(f), depth.find(b));
                        rf == rb || class_reaches(&succ, rb, rf)
                    })
                });
                if blocked {
                    log::debug!(
                        "skipping layering order {} over {}: contradicts user constraints",
                        front.id,
                        behind.id
                    );
                    continue;
                }
                path_pairs.insert((front.id, behind.id));
                push_pair(
                    front.id,
                    behind.id,
                    EdgeSource::Layering,
                    &mut edges,
                    &mut succ,
                    &mut depth,
                );
            }
        }
    }

    let to_ids = |classes: Vec<Vec<usize>>| -> Vec<Vec<VolumeId>> {
        classes
            .into_iter()
            .map(|c| c.into_iter().map(|i| volumes[i]).collect())
            .collect()
    };
    let set = ConstraintSet {
        thickness_classes: to_ids(thick.classes()),
        depth_classes: to_ids(depth.classes()),
        volumes: volumes.clone(),
        order_edges: edges,
        order_margin: config.order_margin,
    };
    debug_assert!(set.topological_order().is_some());
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::{clipart_of, rect_path};
    use crate::model::PathKind;

    fn disjoint_rects(n: usize) -> Clipart {
        clipart_of(
            (0..n)
                .map(|i| rect_path(i, i as f64 * 0.2, 0.0, i as f64 * 0.2 + 0.1, 0.1))
                .collect(),
        )
    }

    fn class_paths(classes: &[Vec<VolumeId>]) -> Vec<Vec<usize>> {
        classes.iter().map(|c| c.iter().map(|v| v.path).collect()).collect()
    }

    #[test]
    fn same_thickness_is_transitive() {
        let c = disjoint_rects(4);
        let anns = [
            Annotation::SameThickness { a: 1, b: 2 },
            Annotation::SameThickness { a: 2, b: 3 },
        ];
        let set = compile_constraints(&c, &anns, &ConstraintConfig::default()).unwrap();
        assert_eq!(class_paths(&set.thickness_classes), vec![vec![0], vec![1, 2, 3]]);
        assert_eq!(set.depth_classes.len(), 4);
        assert!(set.order_edges.is_empty());
    }

    #[test]
    fn two_cycle_is_rejected() {
        let c = disjoint_rects(2);
        let anns = [
            Annotation::DepthOrder { front: 0, behind: 1 },
            Annotation::DepthOrder { front: 1, behind: 0 },
        ];
        let err = compile_constraints(&c, &anns, &ConstraintConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Cycle(_)));
        assert_eq!(err.code(), "CONSTRAINT_CYCLE");
    }

    #[test]
    fn longer_cycle_is_rejected() {
        let c = disjoint_rects(3);
        let anns = [
            Annotation::DepthOrder { front: 0, behind: 1 },
            Annotation::DepthOrder { front: 1, behind: 2 },
            Annotation::DepthOrder { front: 2, behind: 0 },
        ];
        let Err(Error::Cycle(ids)) = compile_constraints(&c, &anns, &ConstraintConfig::default()) else {
            panic!("expected cycle");
        };
        assert_eq!(ids.len(), 3);
    }

    #[test]
    fn order_within_depth_class_conflicts() {
        let c = disjoint_rects(3);
        let anns = [
            Annotation::SameDepth { a: 0, b: 1 },
            Annotation::DepthOrder { front: 1, behind: 0 },
        ];
        let err = compile_constraints(&c, &anns, &ConstraintConfig::default()).unwrap_err();
        assert_eq!(err, Error::Conflict { front: 1, behind: 0 });
    }

    #[test]
    fn cycle_through_depth_class_is_rejected() {
        let c = disjoint_rects(3);
        let anns = [
            Annotation::SameDepth { a: 0, b: 2 },
            Annotation::DepthOrder { front: 0, behind: 1 },
            Annotation::DepthOrder { front: 1, behind: 2 },
        ];
        let err = compile_constraints(&c, &anns, &ConstraintConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Cycle(_)));
    }

    #[test]
    fn overlapping_layers_get_default_edge() {
        let c = clipart_of(vec![rect_path(0, 0.0, 0.0, 0.6, 0.6), rect_path(1, 0.4, 0.4, 1.0, 1.0)]);
        let set = compile_constraints(&c, &[], &ConstraintConfig::default()).unwrap();
        assert_eq!(set.order_edges.len(), 1);
        let e = set.order_edges[0];
        assert_eq!((e.front.path, e.behind.path), (1, 0));
        assert_eq!(e.source, EdgeSource::Layering);
    }

    #[test]
    fn disjoint_or_touching_layers_get_no_edge() {
        let c = clipart_of(vec![rect_path(0, 0.0, 0.0, 0.5, 0.5), rect_path(1, 0.5, 0.0, 1.0, 0.5)]);
        let set = compile_constraints(&c, &[], &ConstraintConfig::default()).unwrap();
        assert!(set.order_edges.is_empty());
    }

    #[test]
    fn user_order_overrides_layering() {
        let c = clipart_of(vec![rect_path(0, 0.0, 0.0, 0.6, 0.6), rect_path(1, 0.4, 0.4, 1.0, 1.0)]);
        let anns = [Annotation::DepthOrder { front: 0, behind: 1 }];
        let set = compile_constraints(&c, &anns, &ConstraintConfig::default()).unwrap();
        assert_eq!(set.path_edges(), vec![(0, 1)]);
        assert_eq!(set.order_edges[0].source, EdgeSource::User);
    }

    #[test]
    fn same_depth_suppresses_layering() {
        let c = clipart_of(vec![rect_path(0, 0.0, 0.0, 0.6, 0.6), rect_path(1, 0.4, 0.4, 1.0, 1.0)]);
        let anns = [Annotation::SameDepth { a: 0, b: 1 }];
        let set = compile_constraints(&c, &anns, &ConstraintConfig::default()).unwrap();
        assert!(set.order_edges.is_empty());
    }

    #[test]
    fn layering_default_that_would_cycle_is_dropped() {
        // 2 over 0 by layering, but the user says 0 > 1 > 2.
        let c = clipart_of(vec![
            rect_path(0, 0.0, 0.0, 0.6, 0.6),
            rect_path(1, 2.0, 2.0, 3.0, 3.0),
            rect_path(2, 0.4, 0.4, 1.0, 1.0),
        ]);
        let anns = [
            Annotation::DepthOrder { front: 0, behind: 1 },
            Annotation::DepthOrder { front: 1, behind: 2 },
        ];
        let set = compile_constraints(&c, &anns, &ConstraintConfig::default()).unwrap();
        assert_eq!(set.path_edges(), vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn multiple_objects_expand_and_share_thickness() {
        let c = disjoint_rects(2);
        let anns = [
            Annotation::MultipleObjects { path: 1, count: 3 },
            Annotation::DepthOrder { front: 0, behind: 1 },
        ];
        let set = compile_constraints(&c, &anns, &ConstraintConfig::default()).unwrap();
        assert_eq!(set.volumes.len(), 4);
        assert_eq!(set.copies_of(1), 3);
        assert_eq!(class_paths(&set.thickness_classes), vec![vec![0], vec![1, 1, 1]]);
        assert_eq!(set.order_edges.len(), 3);
    }

    #[test]
    fn annotation_errors() {
        let mut c = disjoint_rects(3);
        c.paths[2].kind = PathKind::Shading;
        let cfg = ConstraintConfig::default();
        let check = |anns: &[Annotation]| compile_constraints(&c, anns, &cfg).unwrap_err();
        assert_eq!(check(&[Annotation::SameDepth { a: 0, b: 7 }]), Error::BadReference(7));
        assert_eq!(
            check(&[Annotation::SameThickness { a: 0, b: 2 }]),
            Error::BadReference(2)
        );
        assert!(matches!(
            check(&[Annotation::SameDepth { a: 1, b: 1 }]),
            Error::InvalidAnnotation(_)
        ));
        assert!(matches!(
            check(&[Annotation::MultipleObjects { path: 0, count: 1 }]),
            Error::InvalidAnnotation(_)
        ));
        assert!(matches!(
            check(&[
                Annotation::MultipleObjects { path: 0, count: 2 },
                Annotation::MultipleObjects { path: 0, count: 3 }
            ]),
            Error::InvalidAnnotation(_)
        ));
    }

    #[test]
    fn compile_is_idempotent_on_implied_annotations() {
        let c = clipart_of(vec![
            rect_path(0, 0.0, 0.0, 0.6, 0.6),
            rect_path(1, 0.4, 0.4, 1.0, 1.0),
            rect_path(2, 0.5, 0.0, 0.9, 0.3),
            rect_path(3, 2.0, 2.0, 2.5, 2.5),
        ]);
        let anns = [
            Annotation::MultipleObjects { path: 3, count: 2 },
            Annotation::SameThickness { a: 0, b: 3 },
            Annotation::SameDepth { a: 2, b: 3 },
            Annotation::DepthOrder { front: 0, behind: 3 },
        ];
        let cfg = ConstraintConfig::default();
        let first = compile_constraints(&c, &anns, &cfg).unwrap();
        let second = compile_constraints(&c, &first.implied_annotations(), &cfg).unwrap();
        assert_eq!(first.volumes, second.volumes);
        assert_eq!(first.thickness_classes, second.thickness_classes);
        assert_eq!(first.depth_classes, second.depth_classes);
        assert_eq!(first.path_edges(), second.path_edges());
        assert!(second.topological_order().is_some());
    }
}
