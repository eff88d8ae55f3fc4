//! Feasibility-preserving coordinate descent on depths and thicknesses.

use super::resolve::Layout;
use super::{Prism, Samples, SolveConfig};
use crate::constraints::ConstraintSet;
use crate::error::Result;
use crate::shape::PointSet;

const GOLDEN_ITERS: usize = 90;

/// Minimizes a unimodal function on `[lo, hi]`; returns the best point
/// among the golden-section result and both ends.
fn golden(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..GOLDEN_ITERS {
        if b - a <= 1e-13 * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let mid = (a + b) / 2.0;
    [(lo, f(lo)), (hi, f(hi)), (mid, f(mid)), (c, fc), (d, fd)]
        .into_iter()
        .fold(
            (mid, f64::INFINITY),
            |best, cand| if cand.1 < best.1 { cand } else { best },
        )
}

struct State<'a> {
    prisms: &'a mut [Prism],
    samples: &'a [Samples],
    layout: Layout,
    /// Depth class of each prism.
    node_of: Vec<usize>,
    omega: f64,
    d_min: f64,
    delta: f64,
    /// Span used to bound otherwise unbounded depth moves.
    reach: f64,
}

impl State<'_> {
    fn cost(&self) -> f64 {
        let cover: f64 = self
            .prisms
            .iter()
            .zip(self.samples)
            .map(|(p, s)| s.cover(p.d, p.z))
            .sum();
        cover + self.omega * self.prisms.iter().map(|p| p.d * p.d).sum::<f64>()
    }

    /// Feasible depth interval of a class node given its neighbours.
    fn z_bounds(&self, node: usize) -> (f64, f64) {
        let z = self.prisms[self.layout.depth[node][0]].z;
        let mut lo = z - self.reach;
        let mut hi = z + self.reach;
        for &(f, b) in &self.layout.edges {
            if f == node {
                lo = lo.max(self.prisms[self.layout.depth[b][0]].z + self.delta);
            }
            if b == node {
                hi = hi.min(self.prisms[self.layout.depth[f][0]].z - self.delta);
            }
        }
        (lo.min(z), hi.max(z))
    }

    fn move_depth(&mut self, node: usize) -> bool {
        let members = self.layout.depth[node].clone();
        let (lo, hi) = self.z_bounds(node);
        let f = |z: f64| -> f64 {
            members
                .iter()
                .map(|&i| self.samples[i].cover(self.prisms[i].d, z))
                .sum()
        };
        let cur = self.prisms[members[0]].z;
        let (z, fz) = golden(lo, hi, f);
        if fz < f(cur) {
            for &i in &members {
                self.prisms[i].z = z;
            }
            return true;
        }
        false
    }

    fn move_thickness(&mut self, class: usize) -> bool {
        let members = self.layout.thickness[class].clone();
        let k = members.len() as f64;
        let cur = self.prisms[members[0]].d;
        let mut hi = cur.max(self.d_min);
        for &i in &members {
            if let Some((a, b)) = self.samples[i].z_range() {
                let z = self.prisms[i].z;
                hi = hi.max(2.0 * (z - a).abs().max((b - z).abs()));
            }
        }
        let f = |d: f64| -> f64 {
            members
                .iter()
                .map(|&i| self.samples[i].cover(d, self.prisms[i].z))
                .sum::<f64>()
                + self.omega * k * d * d
        };
        let (d, fd) = golden(self.d_min, hi + self.d_min, f);
        if fd < f(cur) {
            for &i in &members {
                self.prisms[i].d = d;
            }
            return true;
        }
        false
    }

    /// Moves one cap of an unconstrained prism while the other stays put.
    fn move_face(&mut self, i: usize, top: bool) -> bool {
        let (lo_z, hi_z) = self.z_bounds(self.node_of[i]);
        let p = &self.prisms[i];
        let (fixed, cur) = if top {
            (p.z_min(), p.z_max())
        } else {
            (p.z_max(), p.z_min())
        };
        let (mut a, mut b) = if top {
            (fixed + self.d_min, cur.max(fixed + self.d_min) + self.reach)
        } else {
            (cur.min(fixed - self.d_min) - self.reach, fixed - self.d_min)
        };
        // The center must stay inside the node's feasible depth interval.
        a = a.max(2.0 * lo_z - fixed);
        b = b.min(2.0 * hi_z - fixed);
        if a >= b {
            return false;
        }
        let s = &self.samples[i];
        let omega = self.omega;
        let f = |t: f64| -> f64 {
            let d = (t - fixed).abs();
            s.cover(d, (t + fixed) / 2.0) + omega * d * d
        };
        let before = f(cur);
        let (t, ft) = golden(a, b, f);
        if ft < before {
            let d = (t - fixed).abs();
            let p = &mut self.prisms[i];
            p.d = d;
            p.z = (t + fixed) / 2.0;
            return true;
        }
        false
    }
}

/// Public entry point taking raw points, one set per prism.
pub fn refine_local(
    prisms: &mut [Prism],
    pointsets: &[PointSet],
    constraints: &ConstraintSet,
    config: &SolveConfig,
) -> Result<()> {
    let samples: Vec<Samples> = prisms
        .iter()
        .zip(pointsets)
        .map(|(p, s)| Samples::new(&p.polygon, &s.points))
        .collect();
    refine_with(prisms, &samples, constraints, config)
}

pub(crate) fn refine_with(
    prisms: &mut [Prism],
    samples: &[Samples],
    cs: &ConstraintSet,
    config: &SolveConfig,
) -> Result<()> {
    let layout = Layout::new(prisms, cs)?;
    let mut node_of = vec![0; prisms.len()];
    for (n, class) in layout.depth.iter().enumerate() {
        for &i in class {
            node_of[i] = n;
        }
    }
    let mut free = vec![false; prisms.len()];
    for (i, flag) in free.iter_mut().enumerate() {
        let alone_depth = layout.depth[node_of[i]].len() == 1;
        let alone_thick = layout.thickness.iter().any(|c| c.len() == 1 && c[0] == i);
        *flag = alone_depth && alone_thick;
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (p, s) in prisms.iter().zip(samples) {
        lo = lo.min(p.z_min());
        hi = hi.max(p.z_max());
        if let Some((a, b)) = s.z_range() {
            lo = lo.min(a);
            hi = hi.max(b);
        }
    }
    let reach = (hi - lo).max(config.d_min) + config.order_margin;
    let mut st = State {
        prisms,
        samples,
        layout,
        node_of,
        omega: config.omega,
        d_min: config.d_min,
        delta: cs.order_margin,
        reach,
    };
    let mut cost = st.cost();
    let start = cost;
    for sweep in 0..config.refine.max_iters {
        let mut moved = false;
        for n in 0..st.layout.depth.len() {
            moved |= st.move_depth(n);
        }
        for c in 0..st.layout.thickness.len() {
            moved |= st.move_thickness(c);
        }
        for (i, &is_free) in free.iter().enumerate() {
            if is_free {
                moved |= st.move_face(i, true);
                moved |= st.move_face(i, false);
            }
        }
        let next = st.cost();
        let gain = cost - next;
        cost = next;
        if !moved || gain <= config.refine.tolerance * (1.0 + cost.abs()) {
            log::debug!("refinement stopped after {} sweeps", sweep + 1);
            break;
        }
    }
    log::debug!("refinement: {start:.6} -> {cost:.6}");
    Ok(())
}
