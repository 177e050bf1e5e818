//! The outer tracking loop: seed queue, cone placement, candidate
//! detection, branch extraction, validation, re-seeding.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flowgraph::{extract_branches, GraphParams};
use crate::network::{seed_candidates, validate_branches, Branch, VesselNetwork};
use crate::sampling::{place_cloud, ConeParams};
use crate::scalar::Real;
use crate::vec3::Vec3;
use crate::vesselness::{fit_cylinder, mix_seed, select_candidates, DEParams, Detection};
use crate::volume::Volume;

/// Everything the tracker needs besides the volume.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackerConfig<T> {
    pub cone: ConeParams<T>,
    pub graph: GraphParams<T>,
    pub de: DEParams<T>,
    /// Fraction of the apex fitness a candidate must reach (rule "higher
    /// than a fraction of the vesselness at the seed point").
    pub sensitivity: T,
    /// Duplicate-branch distance factor, relative to combined radii.
    pub beta_dup: T,
    /// Loop-rejection distance factor, relative to combined radii.
    pub beta_loop: T,
    /// Hard cap on the number of cones processed.
    pub max_iterations: usize,
    pub initial_seed: Vec3<T>,
    /// Initial vessel direction; estimated by multistart fitting when
    /// absent.
    pub initial_direction: Option<Vec3<T>>,
}

impl<T: Real> Default for TrackerConfig<T> {
    fn default() -> Self {
        Self {
            cone: ConeParams {
                alpha: T::one(),
                s: T::of(1.5),
                layers: 4,
            },
            graph: GraphParams::default(),
            de: DEParams::default(),
            sensitivity: T::of(0.5),
            beta_dup: T::one(),
            beta_loop: T::of(1.5),
            max_iterations: 500,
            initial_seed: Vec3::zero(),
            initial_direction: None,
        }
    }
}

impl<T: Real> TrackerConfig<T> {
    pub fn validate(&self) -> Result<()> {
        ConeParams::new(self.cone.alpha, self.cone.s, self.cone.layers)?;
        self.graph.validate()?;
        self.de.validate()?;
        if !(self.sensitivity > T::zero() && self.sensitivity <= T::one()) {
            return Err(Error::InvalidParameter(format!(
                "sensitivity must be in (0, 1], got {}",
                self.sensitivity
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter("max_iterations must be at least 1".into()));
        }
        if self.beta_dup < T::zero() || self.beta_loop < T::zero() {
            return Err(Error::InvalidParameter("validation factors must be non-negative".into()));
        }
        Ok(())
    }
}

/// A pending cone: position, travel direction, expected radius, and where
/// the branch it produces should attach.
#[derive(Debug, Clone, Copy)]
struct QueuedSeed<T> {
    position: Vec3<T>,
    direction: Vec3<T>,
    radius: T,
    parent: Option<(usize, usize)>,
    /// The two initial seeds share a position; only derived seeds are
    /// subject to the proximity guard.
    exempt_from_guard: bool,
}

/// Eight directions spread over the sphere (cube corners), used to estimate
/// the initial vessel direction when none is supplied.
fn multistart_directions<T: Real>() -> Vec<Vec3<T>> {
    let k = T::of(1.0 / 3.0f64.sqrt());
    let mut dirs = Vec::with_capacity(8);
    for sx in [T::one(), -T::one()] {
        for sy in [T::one(), -T::one()] {
            for sz in [T::one(), -T::one()] {
                dirs.push(Vec3::new(sx * k, sy * k, sz * k));
            }
        }
    }
    dirs
}

/// Track the full network from the configured seed. Deterministic for a
/// given config (all randomness flows from `cfg.de.rng_seed`).
pub fn track<T: Real>(v: &Volume<T>, cfg: &TrackerConfig<T>) -> Result<VesselNetwork<T>> {
    cfg.validate()?;
    if !v.contains(cfg.initial_seed) {
        return Err(Error::SeedOutsideVolume);
    }

    let init_r = cfg.cone.s.max(v.max_spacing());

    // Establish the initial direction and apex detection.
    let first = match cfg.initial_direction {
        Some(dir) => {
            let dir = dir
                .normalized()
                .ok_or_else(|| Error::InvalidParameter("initial direction must be nonzero".into()))?;
            let de = DEParams {
                rng_seed: mix_seed(cfg.de.rng_seed, &[0xd1c]),
                ..cfg.de
            };
            fit_cylinder(v, cfg.initial_seed, dir, init_r, &de)?
        }
        None => {
            let mut best: Option<Detection<T>> = None;
            for (k, dir) in multistart_directions::<T>().into_iter().enumerate() {
                let de = DEParams {
                    rng_seed: mix_seed(cfg.de.rng_seed, &[0xd1c, k as u64]),
                    ..cfg.de
                };
                if let Ok(det) = fit_cylinder(v, cfg.initial_seed, dir, init_r, &de) {
                    if best.as_ref().map_or(true, |b| det.w < b.w) {
                        best = Some(det);
                    }
                }
            }
            best.ok_or(Error::SeedNotOnVessel)?
        }
    };

    let mut net = VesselNetwork::new();
    let mut queue: VecDeque<QueuedSeed<T>> = VecDeque::new();
    for dir in [first.model.direction, -first.model.direction] {
        queue.push_back(QueuedSeed {
            position: first.center(),
            direction: dir,
            radius: first.model.r_in,
            parent: None,
            exempt_from_guard: true,
        });
    }

    let mut next_id = 0usize;
    let mut cone = 0usize;
    while let Some(seed) = queue.pop_front() {
        if cone >= cfg.max_iterations {
            break;
        }
        // Skip territory already covered by a consumed seed.
        if !seed.exempt_from_guard
            && net
                .seeds_used
                .iter()
                .any(|(p, _)| p.distance(seed.position) < cfg.beta_loop * seed.radius)
        {
            continue;
        }
        cone += 1;

        let de_cone = DEParams {
            rng_seed: mix_seed(cfg.de.rng_seed, &[0xc0, cone as u64]),
            ..cfg.de
        };
        let apex = match fit_cylinder(v, seed.position, seed.direction, seed.radius, &de_cone) {
            Ok(a) => a,
            Err(_) if cone > 1 => {
                eprintln!("cone {cone}: apex fit failed, seed skipped");
                net.seeds_used.push((seed.position, seed.direction));
                continue;
            }
            Err(e) => return Err(e),
        };

        let cloud = place_cloud(&cfg.cone, apex.center(), apex.model.direction)?;
        let candidates = select_candidates(v, &cloud, &apex, cfg.sensitivity, &de_cone);
        let paths = extract_branches(&candidates, &apex, &cfg.graph)?;

        // Turn graph paths into branches, resolving bifurcation parents.
        let graph_dets: Vec<Detection<T>> =
            std::iter::once(apex).chain(candidates.iter().copied()).collect();
        let mut claims: std::collections::HashMap<usize, (usize, usize)> = std::collections::HashMap::new();
        let mut session: Vec<Branch<T>> = Vec::new();
        for path in &paths {
            let id = next_id;
            next_id += 1;
            let (parent, parent_index) = match claims.get(&path.entry_detection) {
                Some(&(bid, bidx)) => (Some(bid), Some(bidx)),
                None => (seed.parent.map(|(b, _)| b), seed.parent.map(|(_, i)| i)),
            };
            for (k, &det_idx) in path.detections.iter().enumerate() {
                claims.insert(det_idx, (id, k));
            }
            session.push(Branch {
                id,
                detections: path.detections.iter().map(|&k| graph_dets[k]).collect(),
                parent,
                parent_index,
                source_seed: cone - 1,
                total_cost: path.total_cost,
            });
        }

        let found = session.len();
        let accepted = validate_branches(&net, session, cfg.beta_dup, cfg.beta_loop);
        let accepted_count = accepted.len();
        net.seeds_used.push((seed.position, seed.direction));

        // One seed per branch: the best-fitness ending-window detection
        // whose position is not already covered by a consumed seed.
        for branch in &accepted {
            let covered = |p: crate::vec3::Vec3<T>, r: T| {
                net.seeds_used
                    .iter()
                    .any(|(q, _)| q.distance(p) < cfg.beta_loop * r)
            };
            let cands = seed_candidates(branch);
            if std::env::var("VF_TRACE").is_ok() {
                let e = branch.detections.last().unwrap().center();
                eprintln!("  [seed] branch {} len {} end ({:.1},{:.1},{:.1}) cands {} covered {:?}",
                    branch.id, branch.detections.len(), e.x.as_f64(), e.y.as_f64(), e.z.as_f64(), cands.len(),
                    cands.iter().map(|s| covered(s.position, s.radius)).collect::<Vec<_>>());
            }
            if let Some(s) = cands
                .into_iter()
                .find(|s| !covered(s.position, s.radius))
            {
                queue.push_back(QueuedSeed {
                    position: s.position,
                    direction: s.direction,
                    radius: s.radius,
                    parent: Some((s.parent_branch, s.parent_index)),
                    exempt_from_guard: false,
                });
            }
        }
        net.branches.extend(accepted);

        eprintln!(
            "cone {cone}: seed=({:.2}, {:.2}, {:.2}) candidates={} branches={} accepted={} total={}",
            seed.position.x.as_f64(),
            seed.position.y.as_f64(),
            seed.position.z.as_f64(),
            candidates.len(),
            found,
            accepted_count,
            net.branches.len()
        );
    }

    Ok(net)
}
