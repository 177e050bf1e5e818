//! Two-cylinder vessel model: misfit scoring, differential-evolution
//! fitting, and candidate selection over a sample cloud.
//!
//! The model is a pair of concentric cylinders sharing center `c` and axis
//! `D`: the inner one (radius `R_in`) covers the vessel lumen, the shell
//! between `R_in` and `R_out = sqrt(2)*R_in` (equal volumes) covers the
//! surroundings. Intensities in each region are summarized as Gaussians and
//! the misfit is the cross-likelihood of each region under the other's
//! distribution, averaged over all probes — near zero when the regions
//! separate cleanly, large when they blend.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::de;
use crate::error::{Error, Result};
use crate::sampling::{rotation_to, SampleCloud, SampleIndex};
use crate::scalar::Real;
use crate::vec3::Vec3;
use crate::volume::Volume;

/// Probability clamp for the detection likelihood.
const P_DET_EPSILON: f64 = 1e-3;
/// Sigma floor as a fraction of the volume intensity range.
const SIGMA_FLOOR_FRACTION: f64 = 1e-3;
/// Maximum probes per cylinder region.
const MAX_PROBES_PER_REGION: usize = 2000;

/// Concentric two-cylinder vessel hypothesis.
///
/// `r_out` and `height` are derived (`sqrt(2)*r_in` and `2*r_in`), which
/// keeps the equal-volume and height invariants true by construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CylinderModel<T> {
    pub center: Vec3<T>,
    pub direction: Vec3<T>,
    pub r_in: T,
}

impl<T: Real> CylinderModel<T> {
    pub fn new(center: Vec3<T>, direction: Vec3<T>, r_in: T) -> Result<Self> {
        if !(r_in > T::zero()) {
            return Err(Error::InvalidParameter(format!("inner radius must be positive, got {r_in}")));
        }
        let direction = direction
            .normalized()
            .ok_or_else(|| Error::InvalidParameter("cylinder direction must be nonzero".into()))?;
        Ok(Self { center, direction, r_in })
    }

    /// Outer radius: the shell has the same volume as the inner cylinder.
    pub fn r_out(&self) -> T {
        self.r_in * T::of(std::f64::consts::SQRT_2)
    }

    /// Cylinder height, two inner radii.
    pub fn height(&self) -> T {
        self.r_in + self.r_in
    }
}

/// Mean / standard deviation summary of a probed region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianStats<T> {
    pub mean: T,
    pub std: T,
}

impl<T: Real> GaussianStats<T> {
    /// Stats of `values` with the standard deviation floored at `sigma_min`.
    fn from_values(values: &[T], sigma_min: T) -> Self {
        let n = T::from_usize(values.len()).unwrap();
        let mut sum = T::zero();
        for &v in values {
            sum += v;
        }
        let mean = sum / n;
        let mut var = T::zero();
        for &v in values {
            let d = v - mean;
            var += d * d;
        }
        let std = (var / n).sqrt().max(sigma_min);
        Self { mean, std }
    }

    /// Gaussian density at `x`.
    pub fn pdf(&self, x: T) -> T {
        let norm = T::of((2.0 * std::f64::consts::PI).sqrt()) * self.std;
        let z = (x - self.mean) / self.std;
        (-(z * z) / T::of(2.0)).exp() / norm
    }
}

/// A fitted vessel hypothesis at a sample point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection<T> {
    pub model: CylinderModel<T>,
    /// Raw misfit `W` (lower is better).
    pub w: T,
    /// `1 / (1 + w)`, in `(0, 1]` (higher is better).
    pub fitness: T,
    /// `fitness` clamped away from 0 and 1 so `log(1 - p)` stays finite.
    pub p_det: T,
    /// Calotte index of the originating sample point (0 for the apex).
    pub layer: u32,
    pub origin: SampleIndex,
}

impl<T: Real> Detection<T> {
    fn from_fit(model: CylinderModel<T>, w: T, layer: u32, origin: SampleIndex) -> Self {
        let fitness = T::one() / (T::one() + w);
        let eps = T::of(P_DET_EPSILON);
        let p_det = fitness.max(eps).min(T::one() - eps);
        Self { model, w, fitness, p_det, layer, origin }
    }

    pub fn center(&self) -> Vec3<T> {
        self.model.center
    }
}

/// Differential-evolution settings for the cylinder fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DEParams<T> {
    pub population: usize,
    pub generations: usize,
    /// Differential weight F.
    pub weight: T,
    /// Crossover rate CR.
    pub crossover: T,
    /// Center search half-width (mm); the cone sampling distance by default.
    pub search_radius: T,
    /// Inner-radius search range; `None` derives `[max spacing, 4*init_r]`.
    pub r_in_bounds: Option<(T, T)>,
    pub rng_seed: u64,
}

impl<T: Real> DEParams<T> {
    pub fn validate(&self) -> Result<()> {
        if self.population < 8 {
            return Err(Error::InvalidParameter(format!(
                "DE population must be at least 8, got {}",
                self.population
            )));
        }
        if !(self.weight > T::zero() && self.weight <= T::of(2.0)) {
            return Err(Error::InvalidParameter(format!("DE weight must be in (0, 2], got {}", self.weight)));
        }
        if !(self.crossover >= T::zero() && self.crossover <= T::one()) {
            return Err(Error::InvalidParameter(format!(
                "DE crossover must be in [0, 1], got {}",
                self.crossover
            )));
        }
        if !(self.search_radius > T::zero()) {
            return Err(Error::InvalidParameter("DE search radius must be positive".into()));
        }
        Ok(())
    }
}

impl<T: Real> Default for DEParams<T> {
    fn default() -> Self {
        Self {
            population: 30,
            generations: 60,
            weight: T::of(0.7),
            crossover: T::of(0.9),
            search_radius: T::of(1.5),
            r_in_bounds: None,
            rng_seed: 0x7e55e1,
        }
    }
}

/// Deterministic seed mixing for per-candidate RNG streams.
pub(crate) fn mix_seed(base: u64, parts: &[u64]) -> u64 {
    let mut h = base ^ 0x9e37_79b9_7f4a_7c15;
    for &p in parts {
        h ^= p.wrapping_mul(0xbf58_476d_1ce4_e5b9).rotate_left(31);
        // splitmix64 finalizer
        h = h.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = h;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        h = z ^ (z >> 31);
    }
    h
}

/// Cylindrical probe offsets in units of a reference radius, expressed in
/// the local frame `(u, v, axis)`.
struct ProbeLattice<T> {
    inner: Vec<[T; 3]>,
    shell: Vec<[T; 3]>,
}

impl<T: Real> ProbeLattice<T> {
    /// Lattice for radius `r_ref` with steps at most `delta` (mm), capped at
    /// [`MAX_PROBES_PER_REGION`] per region. Offsets scale linearly with the
    /// actual radius, so evaluating at `r <= r_ref` keeps steps under
    /// `delta`.
    fn build(r_ref: T, delta: T) -> Self {
        let sqrt2 = T::of(std::f64::consts::SQRT_2);
        let height = r_ref + r_ref;
        let inner = region_offsets(T::zero(), r_ref, height, delta);
        let shell = region_offsets(r_ref, r_ref * sqrt2, height, delta);
        let scale = |pts: Vec<[T; 3]>| {
            pts.into_iter()
                .map(|[a, b, c]| [a / r_ref, b / r_ref, c / r_ref])
                .collect()
        };
        Self {
            inner: scale(inner),
            shell: scale(shell),
        }
    }
}

/// Deterministic ring/angle/axial offsets (mm) covering the annulus
/// `[rho0, rho1] x [-height/2, height/2]`.
fn region_offsets<T: Real>(rho0: T, rho1: T, height: T, base_delta: T) -> Vec<[T; 3]> {
    let two_pi = T::of(std::f64::consts::TAU);
    let mut delta = base_delta;
    loop {
        let n_r = ((rho1 - rho0) / delta).ceil().to_usize().unwrap_or(1).max(1);
        let n_z = (height / delta).ceil().to_usize().unwrap_or(1).max(1);
        let d_rho = (rho1 - rho0) / T::from_usize(n_r).unwrap();
        let mut count = 0usize;
        for k in 0..n_r {
            let rho = rho0 + d_rho * (T::from_usize(k).unwrap() + T::of(0.5));
            let n_ang = (two_pi * rho / delta).ceil().to_usize().unwrap_or(1).max(1);
            count += n_ang;
        }
        count *= n_z;
        if count > MAX_PROBES_PER_REGION {
            delta = delta * T::of(1.25);
            continue;
        }

        let mut out = Vec::with_capacity(count);
        let d_z = height / T::from_usize(n_z).unwrap();
        for k in 0..n_r {
            let rho = rho0 + d_rho * (T::from_usize(k).unwrap() + T::of(0.5));
            let n_ang = (two_pi * rho / delta).ceil().to_usize().unwrap_or(1).max(1);
            for a in 0..n_ang {
                let ang = two_pi * T::from_usize(a).unwrap() / T::from_usize(n_ang).unwrap();
                let (ca, sa) = (ang.cos(), ang.sin());
                for j in 0..n_z {
                    let z = d_z * (T::from_usize(j).unwrap() + T::of(0.5)) - height / T::of(2.0);
                    out.push([rho * ca, rho * sa, z]);
                }
            }
        }
        return out;
    }
}

/// Scratch buffers reused across misfit evaluations.
struct MisfitScratch<T> {
    inner: Vec<T>,
    shell: Vec<T>,
}

impl<T: Real> MisfitScratch<T> {
    fn new() -> Self {
        Self { inner: Vec::new(), shell: Vec::new() }
    }
}

/// Outcome of probing one model: per-region stats plus the raw misfit.
struct ProbedMisfit<T> {
    w: T,
    inner: GaussianStats<T>,
    shell: GaussianStats<T>,
}

fn probe_misfit<T: Real>(
    v: &Volume<T>,
    center: Vec3<T>,
    direction: Vec3<T>,
    r_in: T,
    lattice: &ProbeLattice<T>,
    scratch: &mut MisfitScratch<T>,
) -> Option<ProbedMisfit<T>> {
    let rot = rotation_to(direction).ok()?;
    let u = rot.rows[0];
    let vv = rot.rows[1];
    let d = rot.rows[2];

    let collect = |offsets: &[[T; 3]], out: &mut Vec<T>| -> usize {
        out.clear();
        let mut planned = 0usize;
        for &[a, b, c] in offsets {
            planned += 1;
            let p = Vec3::new(
                center.x + (u.x * a + vv.x * b + d.x * c) * r_in,
                center.y + (u.y * a + vv.y * b + d.y * c) * r_in,
                center.z + (u.z * a + vv.z * b + d.z * c) * r_in,
            );
            if let Some(val) = v.sample_trilinear(p) {
                out.push(val);
            }
        }
        planned
    };

    let planned_inner = collect(&lattice.inner, &mut scratch.inner);
    let planned_shell = collect(&lattice.shell, &mut scratch.shell);
    let used = scratch.inner.len() + scratch.shell.len();
    let planned = planned_inner + planned_shell;
    if scratch.inner.is_empty() || scratch.shell.is_empty() || used * 2 < planned {
        return None;
    }

    let (lo, hi) = v.intensity_range();
    let sigma_min = ((hi - lo) * T::of(SIGMA_FLOOR_FRACTION)).max(T::of(1e-12));
    let inner = GaussianStats::from_values(&scratch.inner, sigma_min);
    let shell = GaussianStats::from_values(&scratch.shell, sigma_min);

    let mut sum = T::zero();
    for &x in &scratch.inner {
        sum += shell.pdf(x);
    }
    for &x in &scratch.shell {
        sum += inner.pdf(x);
    }
    let w = sum / T::from_usize(used).unwrap();
    Some(ProbedMisfit { w, inner, shell })
}

/// Raw two-cylinder misfit `W` of `model` against the volume (Eq. 9's inner
/// objective). Degenerate placements (insufficient overlap with the image)
/// yield `+inf`.
pub fn cylinder_misfit<T: Real>(v: &Volume<T>, model: &CylinderModel<T>) -> T {
    let lattice = ProbeLattice::build(model.r_in, v.min_spacing() / T::of(2.0));
    let mut scratch = MisfitScratch::new();
    match probe_misfit(v, model.center, model.direction, model.r_in, &lattice, &mut scratch) {
        Some(p) => p.w,
        None => T::infinity(),
    }
}

/// Per-region Gaussian statistics of `model` (inner, shell), or `None` when
/// the model barely overlaps the image.
pub fn region_stats<T: Real>(v: &Volume<T>, model: &CylinderModel<T>) -> Option<(GaussianStats<T>, GaussianStats<T>)> {
    let lattice = ProbeLattice::build(model.r_in, v.min_spacing() / T::of(2.0));
    let mut scratch = MisfitScratch::new();
    probe_misfit(v, model.center, model.direction, model.r_in, &lattice, &mut scratch)
        .map(|p| (p.inner, p.shell))
}

/// Build the local direction basis and map DE parameters to a model.
struct FitFrame<T> {
    init: Vec3<T>,
    u: Vec3<T>,
    v: Vec3<T>,
    w: Vec3<T>,
}

impl<T: Real> FitFrame<T> {
    fn new(init: Vec3<T>, init_dir: Vec3<T>) -> Result<Self> {
        let rot = rotation_to(init_dir)?;
        Ok(Self {
            init,
            u: rot.rows[0],
            v: rot.rows[1],
            w: rot.rows[2],
        })
    }

    /// Params are `[dx, dy, dz, theta, phi, r_in]`; theta/phi are spherical
    /// offsets around the initial direction.
    fn decode(&self, p: &[T]) -> (Vec3<T>, Vec3<T>, T) {
        let center = self.init + Vec3::new(p[0], p[1], p[2]);
        let (st, ct) = (p[3].sin(), p[3].cos());
        let (sp, cp) = (p[4].sin(), p[4].cos());
        let dir = self.u.scale(st * cp) + self.v.scale(st * sp) + self.w.scale(ct);
        (center, dir, p[5])
    }
}

/// Fit the cylinder model near `init` by differential evolution, minimizing
/// the misfit. Models whose inner region is not brighter than the shell are
/// rejected during the search. Deterministic for a given `rng_seed`.
pub fn fit_cylinder<T: Real>(
    v: &Volume<T>,
    init: Vec3<T>,
    init_dir: Vec3<T>,
    init_r: T,
    de: &DEParams<T>,
) -> Result<Detection<T>> {
    de.validate()?;
    if !v.contains(init) {
        return Err(Error::SeedOutsideVolume);
    }
    let init_dir = init_dir
        .normalized()
        .ok_or_else(|| Error::InvalidParameter("initial direction must be nonzero".into()))?;

    let (r_lo, r_hi) = de.r_in_bounds.unwrap_or_else(|| {
        (v.max_spacing(), init_r * T::of(4.0))
    });
    let r_lo = r_lo.max(T::of(1e-6));
    let r_hi = r_hi.max(r_lo * T::of(1.0 + 1e-9));

    let sr = de.search_radius;
    let bounds = [
        (-sr, sr),
        (-sr, sr),
        (-sr, sr),
        (T::zero(), T::of(std::f64::consts::FRAC_PI_2)),
        (T::zero(), T::of(std::f64::consts::TAU)),
        (r_lo, r_hi),
    ];
    let start = [
        T::zero(),
        T::zero(),
        T::zero(),
        T::zero(),
        T::zero(),
        init_r.max(r_lo).min(r_hi),
    ];

    let frame = FitFrame::new(init, init_dir)?;
    let lattice = ProbeLattice::build(r_hi, v.min_spacing() / T::of(2.0));
    let mut scratch = MisfitScratch::new();

    let objective = |p: &[T]| -> T {
        let (center, dir, r) = frame.decode(p);
        match probe_misfit(v, center, dir, r, &lattice, &mut scratch) {
            // Rule: the inner cylinder must be brighter than the shell.
            Some(pm) if pm.inner.mean > pm.shell.mean => pm.w,
            _ => T::infinity(),
        }
    };

    let result = de::minimize(
        objective,
        &bounds,
        Some(&start),
        de.population,
        de.generations,
        de.weight,
        de.crossover,
        de.rng_seed,
    );
    if !result.value.is_finite() {
        return Err(Error::SeedNotOnVessel);
    }

    let (center, dir, r) = frame.decode(&result.x);
    // Orient along the initial direction so cones keep travelling forward.
    let dir = if dir.dot(init_dir) < T::zero() { -dir } else { dir };
    let model = CylinderModel::new(center, dir, r)?;

    // Score the returned model exactly as `cylinder_misfit` would, so the
    // stored misfit is reproducible from the model alone.
    let w = cylinder_misfit(v, &model);
    if !w.is_finite() {
        return Err(Error::SeedNotOnVessel);
    }
    match region_stats(v, &model) {
        Some((inner, shell)) if inner.mean > shell.mean => {}
        _ => return Err(Error::SeedNotOnVessel),
    }
    Ok(Detection::from_fit(model, w, 0, SampleIndex::new(0, 0, 0)))
}

/// Fit every promising sample point of `cloud` and keep detections that
/// pass the selection rules.
///
/// Sample points whose single-probe intensity strays more than three
/// (floored) standard deviations from the apex inner mean are skipped
/// before any fitting. Survivors are fitted in parallel with per-point RNG
/// streams; the result is sorted by `(layer, origin)` so the outcome does
/// not depend on scheduling.
pub fn select_candidates<T: Real>(
    v: &Volume<T>,
    cloud: &SampleCloud<T>,
    seed_det: &Detection<T>,
    sensitivity: T,
    de: &DEParams<T>,
) -> Vec<Detection<T>> {
    let Some((apex_inner, _)) = region_stats(v, &seed_det.model) else {
        return Vec::new();
    };
    let gate = T::of(3.0) * apex_inner.std;

    let prefiltered: Vec<(SampleIndex, Vec3<T>)> = cloud
        .points
        .iter()
        .filter(|(_, p)| match v.sample_trilinear(*p) {
            Some(i) => (i - apex_inner.mean).abs() <= gate,
            None => false,
        })
        .cloned()
        .collect();

    let min_radius = v.max_spacing();
    let threshold = sensitivity * seed_det.fitness;

    let mut detections: Vec<Detection<T>> = prefiltered
        .par_iter()
        .filter_map(|(idx, p)| {
            let de_local = DEParams {
                rng_seed: mix_seed(de.rng_seed, &[idx.l as u64, idx.m as u64, idx.n as u64]),
                ..*de
            };
            let mut det = fit_cylinder(v, *p, cloud.axis, seed_det.model.r_in, &de_local).ok()?;
            det.layer = idx.l;
            det.origin = *idx;
            (det.fitness >= threshold && det.model.r_in >= min_radius).then_some(det)
        })
        .collect();

    detections.sort_by(|a, b| (a.layer, a.origin).cmp(&(b.layer, b.origin)));
    detections
}
