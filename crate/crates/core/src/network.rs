//! Vascular network assembly: branch validation, next-seed derivation and
//! exports (topology text, SWC, rasterized mask).
//!
//! Topology export format (one branch record per branch, stable field
//! order, all lengths in mm):
//!
//! ```text
//! # vesselflow topology 1
//! branches <count>
//! branch <id> parent <id|-1> parent_index <idx|-1> seed <cone> cost <total> points <n>
//! <x> <y> <z> <radius> <fitness>
//! ...
//! ```

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::vec3::Vec3;
use crate::vesselness::Detection;
use crate::volume::{rasterize_tubes, TubePolyline, Volume};

/// An accepted vessel branch: an ordered detection chain plus its
/// attachment to the rest of the network.
#[derive(Debug, Clone)]
pub struct Branch<T> {
    pub id: usize,
    pub detections: Vec<Detection<T>>,
    /// Branch this one bifurcates from, `None` for the root.
    pub parent: Option<usize>,
    /// Index into the parent's detection list where this branch attaches.
    pub parent_index: Option<usize>,
    /// Ordinal of the cone (tracking iteration) that produced the branch.
    pub source_seed: usize,
    /// Flow cost of the extracted path (negative; lower is better).
    pub total_cost: T,
}

impl<T: Real> Branch<T> {
    pub fn mean_radius(&self) -> T {
        let mut sum = T::zero();
        for d in &self.detections {
            sum += d.model.r_in;
        }
        sum / T::from_usize(self.detections.len().max(1)).unwrap()
    }

    pub fn positions(&self) -> impl Iterator<Item = Vec3<T>> + '_ {
        self.detections.iter().map(|d| d.center())
    }
}

/// The accumulated network: a forest of branches rooted at the initial
/// seed.
#[derive(Debug, Clone, Default)]
pub struct VesselNetwork<T> {
    pub branches: Vec<Branch<T>>,
    /// Every seed consumed so far, as (position, direction).
    pub seeds_used: Vec<(Vec3<T>, Vec3<T>)>,
}

impl<T: Real> VesselNetwork<T> {
    pub fn new() -> Self {
        Self {
            branches: Vec::new(),
            seeds_used: Vec::new(),
        }
    }

    pub fn branch(&self, id: usize) -> Option<&Branch<T>> {
        self.branches.iter().find(|b| b.id == id)
    }

    pub fn total_detections(&self) -> usize {
        self.branches.iter().map(|b| b.detections.len()).sum()
    }
}

/// A seed for the next tracking iteration.
#[derive(Debug, Clone, Copy)]
pub struct Seed<T> {
    pub position: Vec3<T>,
    pub direction: Vec3<T>,
    pub radius: T,
    pub parent_branch: usize,
    /// Index of the spawning detection within the parent branch.
    pub parent_index: usize,
}

/// Mean of nearest-point distances pooled over both directions; symmetric
/// in its inputs.
fn mean_branch_distance<T: Real>(a: &Branch<T>, b: &Branch<T>) -> T {
    let nearest = |p: Vec3<T>, other: &Branch<T>| -> T {
        let mut best = T::infinity();
        for q in other.positions() {
            let d = p.distance(q);
            if d < best {
                best = d;
            }
        }
        best
    };
    let mut sum = T::zero();
    let mut count = 0usize;
    for p in a.positions() {
        sum += nearest(p, b);
        count += 1;
    }
    for q in b.positions() {
        sum += nearest(q, a);
        count += 1;
    }
    sum / T::from_usize(count.max(1)).unwrap()
}

/// Number of leading detections of a new branch excluded from loop checks
/// (they sit in the attachment neighbourhood by construction).
const ATTACHMENT_ZONE: usize = 3;

/// Anatomical validation of freshly extracted branches.
///
/// Rule 1 (duplicates): among the new branches, a pair whose mean
/// nearest-point distance falls below `beta_dup * (r_a + r_b)` keeps only
/// the cheaper branch (ties keep the lower id). Branches attached to a
/// discarded branch are discarded with it.
///
/// Rule 2 (loops): a new branch whose detections beyond the first
/// [`ATTACHMENT_ZONE`] come closer to an already accepted branch than
/// `beta_loop * (r_new + r_existing)` is discarded. Network points within
/// that same threshold of the new branch's entry point are exempt — every
/// branch is legitimately close to the network where it attaches, whether
/// at a bifurcation or at the shared initial seed.
pub fn validate_branches<T: Real>(
    net: &VesselNetwork<T>,
    new: Vec<Branch<T>>,
    beta_dup: T,
    beta_loop: T,
) -> Vec<Branch<T>> {
    let mut discarded = vec![false; new.len()];

    // Rule 1: pairwise duplicate suppression among the new branches.
    for i in 0..new.len() {
        for j in (i + 1)..new.len() {
            let threshold = beta_dup * (new[i].mean_radius() + new[j].mean_radius());
            if mean_branch_distance(&new[i], &new[j]) < threshold {
                // Higher cost is worse; ties discard the higher id.
                let drop_i = match new[i].total_cost.partial_cmp(&new[j].total_cost) {
                    Some(std::cmp::Ordering::Greater) => true,
                    Some(std::cmp::Ordering::Less) => false,
                    _ => new[i].id > new[j].id,
                };
                discarded[if drop_i { i } else { j }] = true;
            }
        }
    }

    // Rule 2: reject reconnections to the already segmented network.
    // Branches arrive in extraction order (parents precede children), so a
    // single pass can also cascade discards to attached branches.
    let mut dropped_ids: std::collections::HashSet<usize> = new
        .iter()
        .zip(&discarded)
        .filter(|(_, &d)| d)
        .map(|(b, _)| b.id)
        .collect();
    let mut accepted: Vec<Branch<T>> = Vec::new();
    'branches: for (i, branch) in new.into_iter().enumerate() {
        let orphan = branch.parent.is_some_and(|pid| dropped_ids.contains(&pid));
        if discarded[i] || orphan {
            dropped_ids.insert(branch.id);
            continue;
        }
        let tail: Vec<&Detection<T>> = branch.detections.iter().skip(ATTACHMENT_ZONE).collect();
        if !tail.is_empty() {
            let attach = branch.detections[0].center();
            for existing in &net.branches {
                let threshold = beta_loop * (branch.mean_radius() + existing.mean_radius());
                for q in existing.positions() {
                    if q.distance(attach) <= threshold {
                        continue; // attachment neighbourhood
                    }
                    for d in &tail {
                        if d.center().distance(q) < threshold {
                            dropped_ids.insert(branch.id);
                            continue 'branches; // loop: reject the branch
                        }
                    }
                }
            }
        }
        accepted.push(branch);
    }
    accepted
}

/// Seed candidates of one branch: every detection in its ending part (the
/// last 30%), best fitness first, re-oriented along the branch travel
/// direction. Branches with fewer than two detections have none.
pub fn seed_candidates<T: Real>(branch: &Branch<T>) -> Vec<Seed<T>> {
    let len = branch.detections.len();
    if len < 2 {
        return Vec::new();
    }
    let window = ((T::of(0.3) * T::from_usize(len).unwrap()).ceil())
        .to_usize()
        .unwrap()
        .max(1);
    let first = len - window;
    let mut order: Vec<usize> = (first..len).collect();
    // Best fitness first; earlier index breaks ties.
    order.sort_by(|&a, &b| {
        branch.detections[b]
            .fitness
            .partial_cmp(&branch.detections[a].fitness)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    order
        .into_iter()
        .map(|i| {
            let det = &branch.detections[i];
            // Travel measured from the branch entry; fitted directions are
            // already cone-forward, so only a decisive travel (longer than
            // the local radius) may flip them.
            let travel = det.center() - branch.detections[0].center();
            let mut direction = det.model.direction;
            if travel.norm() > det.model.r_in && direction.dot(travel) < T::zero() {
                direction = -direction;
            }
            Seed {
                position: det.center(),
                direction,
                radius: det.model.r_in,
                parent_branch: branch.id,
                parent_index: i,
            }
        })
        .collect()
}

/// The single best seed per branch (the top candidate of
/// [`seed_candidates`]).
pub fn next_seeds<T: Real>(accepted: &[Branch<T>]) -> Vec<Seed<T>> {
    accepted
        .iter()
        .filter_map(|b| seed_candidates(b).into_iter().next())
        .collect()
}

/// Parsed form of the topology export.
#[derive(Debug, Clone, PartialEq)]
pub struct TopologyBranch<T> {
    pub id: usize,
    pub parent: Option<usize>,
    pub parent_index: Option<usize>,
    /// Tracking iteration (cone) that produced the branch.
    pub source_seed: usize,
    /// Per detection: position, radius, fitness.
    pub points: Vec<(Vec3<T>, T, T)>,
}

/// Write the branch forest as the structured text format above.
pub fn export_topology<T: Real, W: Write>(net: &VesselNetwork<T>, mut w: W) -> std::io::Result<()> {
    writeln!(w, "# vesselflow topology 1")?;
    writeln!(w, "branches {}", net.branches.len())?;
    for b in &net.branches {
        let parent = b.parent.map(|p| p as i64).unwrap_or(-1);
        let pidx = b.parent_index.map(|p| p as i64).unwrap_or(-1);
        writeln!(
            w,
            "branch {} parent {} parent_index {} seed {} cost {} points {}",
            b.id,
            parent,
            pidx,
            b.source_seed,
            b.total_cost.as_f64(),
            b.detections.len()
        )?;
        for d in &b.detections {
            let c = d.center();
            writeln!(
                w,
                "{} {} {} {} {}",
                c.x.as_f64(),
                c.y.as_f64(),
                c.z.as_f64(),
                d.model.r_in.as_f64(),
                d.fitness.as_f64()
            )?;
        }
    }
    Ok(())
}

/// Read a topology export back (positions, radii and fitness only).
pub fn parse_topology<T: Real, R: BufRead>(r: R) -> Result<Vec<TopologyBranch<T>>> {
    let bad = |detail: String| Error::format("topology file", detail);
    let mut lines = r.lines();
    let mut next_line = || -> Result<Option<String>> {
        match lines.next() {
            Some(Ok(l)) => Ok(Some(l)),
            Some(Err(e)) => Err(Error::format("topology file", e.to_string())),
            None => Ok(None),
        }
    };

    let header = next_line()?.ok_or_else(|| bad("empty file".into()))?;
    if !header.starts_with("# vesselflow topology") {
        return Err(bad("missing topology header".into()));
    }
    let count_line = next_line()?.ok_or_else(|| bad("missing branch count".into()))?;
    let count: usize = count_line
        .strip_prefix("branches ")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| bad(format!("bad branch count line `{count_line}`")))?;

    let mut branches = Vec::with_capacity(count);
    for _ in 0..count {
        let head = next_line()?.ok_or_else(|| bad("unexpected end of file".into()))?;
        let tokens: Vec<&str> = head.split_whitespace().collect();
        if tokens.len() != 12 || tokens[0] != "branch" {
            return Err(bad(format!("bad branch record `{head}`")));
        }
        let parse_i64 = |s: &str| s.parse::<i64>().map_err(|_| bad(format!("bad integer `{s}`")));
        let id = parse_i64(tokens[1])? as usize;
        let parent = match parse_i64(tokens[3])? {
            -1 => None,
            p => Some(p as usize),
        };
        let parent_index = match parse_i64(tokens[5])? {
            -1 => None,
            p => Some(p as usize),
        };
        let source_seed = parse_i64(tokens[7])? as usize;
        let points_n = parse_i64(tokens[11])? as usize;
        let mut points = Vec::with_capacity(points_n);
        for _ in 0..points_n {
            let line = next_line()?.ok_or_else(|| bad("truncated point list".into()))?;
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| bad(format!("bad point line `{line}`: {e}")))?;
            if vals.len() != 5 {
                return Err(bad(format!("expected 5 fields per point, got `{line}`")));
            }
            points.push((Vec3::of(vals[0], vals[1], vals[2]), T::of(vals[3]), T::of(vals[4])));
        }
        branches.push(TopologyBranch {
            id,
            parent,
            parent_index,
            source_seed,
            points,
        });
    }
    Ok(branches)
}

/// Standard 7-column SWC linearization of the forest
/// (`id type x y z radius parent`), vessel samples typed 2.
pub fn export_swc<T: Real, W: Write>(branches: &[TopologyBranch<T>], mut w: W) -> std::io::Result<()> {
    writeln!(w, "# id type x y z radius parent")?;
    // (branch id, point index) -> swc sample id
    let mut sample_ids: std::collections::HashMap<(usize, usize), usize> = std::collections::HashMap::new();
    let mut next_id = 1usize;
    for b in branches {
        let mut prev: i64 = match (b.parent, b.parent_index) {
            (Some(pid), Some(pidx)) => sample_ids.get(&(pid, pidx)).map(|&s| s as i64).unwrap_or(-1),
            _ => -1,
        };
        for (k, (p, r, _)) in b.points.iter().enumerate() {
            let id = next_id;
            next_id += 1;
            sample_ids.insert((b.id, k), id);
            writeln!(
                w,
                "{} 2 {} {} {} {} {}",
                id,
                p.x.as_f64(),
                p.y.as_f64(),
                p.z.as_f64(),
                r.as_f64(),
                prev
            )?;
            prev = id as i64;
        }
    }
    Ok(())
}

impl<T: Real> VesselNetwork<T> {
    /// The network as parsed-topology records (used by the exporters).
    pub fn to_topology(&self) -> Vec<TopologyBranch<T>> {
        self.branches
            .iter()
            .map(|b| TopologyBranch {
                id: b.id,
                parent: b.parent,
                parent_index: b.parent_index,
                source_seed: b.source_seed,
                points: b
                    .detections
                    .iter()
                    .map(|d| (d.center(), d.model.r_in, d.fitness))
                    .collect(),
            })
            .collect()
    }
}

/// Voxelize the network: voxels within the interpolated branch radius of
/// any centerline segment become 1. Child branches are connected to their
/// parent attachment point so bifurcations have no gaps.
pub fn rasterize_mask<T: Real>(net: &VesselNetwork<T>, template: &Volume<T>) -> Volume<T> {
    let mut tubes: Vec<TubePolyline<T>> = Vec::new();
    for b in &net.branches {
        let mut tube: TubePolyline<T> = Vec::with_capacity(b.detections.len() + 1);
        if let (Some(pid), Some(pidx)) = (b.parent, b.parent_index) {
            if let Some(parent) = net.branch(pid) {
                if let Some(d) = parent.detections.get(pidx) {
                    tube.push((d.center(), d.model.r_in));
                }
            }
        }
        for d in &b.detections {
            tube.push((d.center(), d.model.r_in));
        }
        tubes.push(tube);
    }
    rasterize_tubes(template, &tubes)
}
