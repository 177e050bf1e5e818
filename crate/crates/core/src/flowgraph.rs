//! Layered split-node flow graph over detections and iterative branch
//! extraction.
//!
//! Each detection `i` is a node pair `b_i -> e_i` joined by a detection edge
//! with negative cost `log(1 - p_det)`; transition edges run between
//! adjacent layers, the source feeds `e_i` (cost 1) where entrance is
//! allowed, and every `b_i` can exit to the sink at cost `1 + C_det(i)`.
//! Extracting one unit of flow at a time reduces the min-cost flow to a
//! shortest path on a DAG, which is solved exactly by relaxation in layer
//! order (negative edges are safe on a DAG). Accepted branches charge a
//! toll on nearby detection edges and become entrance points, so later
//! paths diverge and bifurcations emerge naturally; extraction stops when
//! the cheapest remaining path has non-negative cost.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::vesselness::Detection;

/// Graph construction and toll parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphParams<T> {
    /// Transition cutoff distance (mm).
    pub d_max: T,
    /// Toll penalty radius (mm).
    pub d_radius: T,
    /// Toll weight.
    pub k_toll: T,
}

impl<T: Real> Default for GraphParams<T> {
    fn default() -> Self {
        Self {
            d_max: T::of(3.0),
            d_radius: T::of(4.0),
            k_toll: T::of(5.0),
        }
    }
}

impl<T: Real> GraphParams<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.d_max > T::zero()) {
            return Err(Error::InvalidParameter(format!("d_max must be positive, got {}", self.d_max)));
        }
        if !(self.d_radius > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "d_radius must be positive, got {}",
                self.d_radius
            )));
        }
        if self.k_toll < T::zero() {
            return Err(Error::InvalidParameter(format!("k_toll must be non-negative, got {}", self.k_toll)));
        }
        Ok(())
    }
}

/// One extracted branch: the newly claimed detections in layer order plus
/// the entry detection (the bifurcation parent when it was claimed by an
/// earlier branch).
#[derive(Debug, Clone, PartialEq)]
pub struct BranchPath<T> {
    /// Indices into the graph's detection list, consecutive layers.
    pub detections: Vec<usize>,
    /// Detection whose end node received the entering flow.
    pub entry_detection: usize,
    /// Sum of traversed edge costs (entrance + transitions + detection
    /// edges + exit).
    pub total_cost: T,
}

/// Directed layered graph over detections; index 0 is always the apex.
#[derive(Debug, Clone)]
pub struct FlowGraph<T> {
    detections: Vec<Detection<T>>,
    base_det_cost: Vec<T>,
    toll: Vec<T>,
    source: Vec<bool>,
    claimed: Vec<bool>,
    /// Transition edges `e_i -> b_j` as `(j, cost)`, ascending `j`.
    fwd: Vec<Vec<(usize, T)>>,
    entrance_cost: T,
}

impl<T: Real> FlowGraph<T> {
    pub fn detections(&self) -> &[Detection<T>] {
        &self.detections
    }

    pub fn toll(&self, i: usize) -> T {
        self.toll[i]
    }

    pub fn is_claimed(&self, i: usize) -> bool {
        self.claimed[i]
    }

    pub fn is_source(&self, i: usize) -> bool {
        self.source[i]
    }

    /// Detection-edge cost including accumulated toll.
    pub fn detection_cost(&self, i: usize) -> T {
        self.base_det_cost[i] + self.toll[i]
    }

    /// Exit-edge cost `1 + C_det(i)`. The toll is a per-detection penalty,
    /// so it rides along wherever `C_det(i)` appears; otherwise
    /// entrance-transition-exit hops near an accepted branch would stay
    /// profitable forever and extraction would never terminate cleanly.
    pub fn exit_cost(&self, i: usize) -> T {
        self.entrance_cost + self.base_det_cost[i] + self.toll[i]
    }

    pub fn transitions(&self, i: usize) -> &[(usize, T)] {
        &self.fwd[i]
    }

    /// Structured text dump of nodes and edges for inspection.
    pub fn write_debug<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "flowgraph detections {}", self.detections.len())?;
        for (i, d) in self.detections.iter().enumerate() {
            let c = d.center();
            writeln!(
                w,
                "node {} layer {} center {} {} {} p_det {} claimed {} source {}",
                i,
                d.layer,
                c.x.as_f64(),
                c.y.as_f64(),
                c.z.as_f64(),
                d.p_det.as_f64(),
                self.claimed[i],
                self.source[i]
            )?;
        }
        for i in 0..self.detections.len() {
            if self.source[i] {
                writeln!(w, "edge entrance {} cost {}", i, self.entrance_cost.as_f64())?;
            }
            if !self.claimed[i] {
                writeln!(w, "edge detection {} cost {}", i, self.detection_cost(i).as_f64())?;
                writeln!(w, "edge exit {} cost {}", i, self.exit_cost(i).as_f64())?;
            }
            for &(j, c) in &self.fwd[i] {
                writeln!(w, "edge transition {} {} cost {}", i, j, c.as_f64())?;
            }
        }
        Ok(())
    }
}

/// Build the graph from `apex` (layer 0) plus candidate detections sorted by
/// layer. Entrance flow is initially allowed only at the apex.
pub fn build_graph<T: Real>(
    dets: &[Detection<T>],
    apex: &Detection<T>,
    gp: &GraphParams<T>,
) -> Result<FlowGraph<T>> {
    gp.validate()?;
    if apex.layer != 0 {
        return Err(Error::InvalidParameter(format!(
            "apex detection must be on layer 0, got layer {}",
            apex.layer
        )));
    }
    let mut detections = Vec::with_capacity(dets.len() + 1);
    detections.push(*apex);
    let mut last_layer = 0u32;
    for d in dets {
        if d.layer == 0 {
            return Err(Error::InvalidParameter("candidate detections must lie on layers >= 1".into()));
        }
        if d.layer < last_layer {
            return Err(Error::InvalidParameter("detections must be sorted by layer".into()));
        }
        last_layer = d.layer;
        detections.push(*d);
    }

    let n = detections.len();
    let base_det_cost: Vec<T> = detections
        .iter()
        .map(|d| (T::one() - d.p_det).ln())
        .collect();

    let mut fwd: Vec<Vec<(usize, T)>> = vec![Vec::new(); n];
    for i in 0..n {
        for (j, dj) in detections.iter().enumerate() {
            if dj.layer != detections[i].layer + 1 {
                continue;
            }
            let dist = detections[i].center().distance(dj.center());
            if dist < gp.d_max {
                let cost = -((gp.d_max - dist) / gp.d_max).ln();
                fwd[i].push((j, cost));
            }
        }
    }

    let mut source = vec![false; n];
    source[0] = true;

    Ok(FlowGraph {
        detections,
        base_det_cost,
        toll: vec![T::zero(); n],
        source,
        claimed: vec![false; n],
        fwd,
        entrance_cost: T::one(),
    })
}

/// Exact minimum-cost source-to-sink path under the current costs, or
/// `None` when no path exists. Among equal-cost paths the lexicographically
/// smallest detection-index sequence is returned (with ending earlier
/// preferred over continuing), which makes extraction deterministic.
pub fn min_cost_path<T: Real>(g: &FlowGraph<T>) -> Option<BranchPath<T>> {
    let n = g.detections.len();
    let inf = T::infinity();

    // Cost-to-sink from b_i / e_i, filled in descending layer order.
    let mut from_b = vec![inf; n];
    let mut from_e = vec![inf; n];
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| std::cmp::Reverse((g.detections[i].layer, i)));

    for &i in &order {
        let mut best_e = inf;
        for &(j, c) in &g.fwd[i] {
            let via = c + from_b[j];
            if via < best_e {
                best_e = via;
            }
        }
        from_e[i] = best_e;

        if !g.claimed[i] {
            let exit = g.exit_cost(i);
            let through = g.detection_cost(i) + from_e[i];
            from_b[i] = exit.min(through);
        }
    }

    // Cheapest entrance, smallest index on ties.
    let mut start: Option<(usize, T)> = None;
    for i in 0..n {
        if !g.source[i] {
            continue;
        }
        let total = g.entrance_cost + from_e[i];
        if total.is_finite() {
            match start {
                Some((_, best)) if best <= total => {}
                _ => start = Some((i, total)),
            }
        }
    }
    let (entry, _) = start?;

    // Forward walk re-deriving the optimum, preferring exit then smaller
    // indices, accumulating the actual edge costs.
    let mut sequence = vec![entry];
    let mut total = g.entrance_cost;
    let mut cur = entry;
    loop {
        let target = from_e[cur];
        let mut next: Option<(usize, T)> = None;
        for &(j, c) in &g.fwd[cur] {
            if c + from_b[j] == target {
                next = Some((j, c));
                break; // fwd is ascending in j
            }
        }
        let (j, c) = next.expect("finite cost-to-sink implies a consistent successor");
        total += c;
        sequence.push(j);

        let exit = g.exit_cost(j);
        if exit == from_b[j] {
            total += exit;
            break;
        }
        total += g.detection_cost(j);
        cur = j;
    }

    // Only the entry may have been claimed before; the rest is newly owned.
    let detections = if g.claimed[sequence[0]] {
        sequence[1..].to_vec()
    } else {
        sequence.clone()
    };
    Some(BranchPath {
        detections,
        entry_detection: entry,
        total_cost: total,
    })
}

/// Charge tolls around an accepted path and open its detections as
/// bifurcation entrances. Claimed detections lose their detection and exit
/// edges, so branches never overlap.
pub fn apply_toll<T: Real>(g: &mut FlowGraph<T>, accepted: &BranchPath<T>, gp: &GraphParams<T>) {
    for i in 0..g.detections.len() {
        let ci = g.detections[i].center();
        let mut add = T::zero();
        for &j in &accepted.detections {
            let d = ci.distance(g.detections[j].center());
            if d <= gp.d_radius {
                add += gp.k_toll * (-d / gp.d_radius).exp();
            }
        }
        g.toll[i] += add;
    }
    for &j in &accepted.detections {
        g.claimed[j] = true;
        g.source[j] = true;
    }
}

/// Iteratively extract branches until the cheapest new branch would cost
/// zero or more.
pub fn extract_branches<T: Real>(
    dets: &[Detection<T>],
    apex: &Detection<T>,
    gp: &GraphParams<T>,
) -> Result<Vec<BranchPath<T>>> {
    let mut g = build_graph(dets, apex, gp)?;
    let mut branches = Vec::new();
    while let Some(path) = min_cost_path(&g) {
        if path.total_cost >= T::zero() {
            break;
        }
        apply_toll(&mut g, &path, gp);
        branches.push(path);
    }
    Ok(branches)
}
