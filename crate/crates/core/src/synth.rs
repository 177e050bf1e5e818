//! Synthetic vessel phantoms with analytic ground truth.
//!
//! Every phantom is built from an explicit centerline (polylines with per
//! vertex radii), rasterized to a binary ground-truth mask, and turned into
//! an intensity volume by painting vessel/background values and adding
//! i.i.d. Gaussian noise. The mask is always noise-free.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::rotation_to;
use crate::scalar::Real;
use crate::vec3::Vec3;
use crate::vesselness::mix_seed;
use crate::volume::{rasterize_tubes, TubePolyline, Volume};

/// Shape-specific phantom parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhantomKind<T> {
    /// Planar sinusoidal vessel `y = A sin(2 pi x / lambda)` with optional
    /// straight offshoots along its course.
    Sinusoid {
        amplitude: T,
        wavelength: T,
        radius: T,
        #[serde(default)]
        bifurcations: u32,
    },
    /// Stochastic binary tree grown from a root segment.
    Tree {
        depth: u32,
        angle_min: T,
        angle_max: T,
        length_decay: T,
        radius_decay: T,
        root_radius: T,
        root_length: T,
    },
    /// Axis-aligned straight tube through the volume center.
    StraightTube { radius: T },
    /// Straight stem splitting into two symmetric arms.
    YTube { radius: T, angle: T },
    /// A stem feeding a closed ring (two arcs meeting), for validation
    /// tests.
    LoopTube { radius: T },
}

/// Full phantom description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec<T> {
    #[serde(flatten)]
    pub kind: PhantomKind<T>,
    pub dims: [usize; 3],
    pub spacing: Vec3<T>,
    pub vessel_intensity: T,
    pub background_intensity: T,
    pub noise_sigma: T,
    pub rng_seed: u64,
}

impl<T: Real> PhantomSpec<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.vessel_intensity > self.background_intensity) {
            return Err(Error::InvalidParameter(
                "vessel intensity must exceed background intensity".into(),
            ));
        }
        if self.noise_sigma < T::zero() {
            return Err(Error::InvalidParameter("noise sigma must be non-negative".into()));
        }
        if let PhantomKind::Tree { depth, .. } = self.kind {
            if depth == 0 {
                return Err(Error::InvalidParameter("tree depth must be at least 1".into()));
            }
        }
        Ok(())
    }

    /// Physical extent of the voxel-center grid (mm).
    fn extent(&self) -> Vec3<T> {
        Vec3::new(
            T::from_usize(self.dims[0] - 1).unwrap() * self.spacing.x,
            T::from_usize(self.dims[1] - 1).unwrap() * self.spacing.y,
            T::from_usize(self.dims[2] - 1).unwrap() * self.spacing.z,
        )
    }

    /// Voxel-center nearest the middle of the grid; tubes are centered here
    /// so their cross-sections voxelize symmetrically.
    fn mid_voxel(&self) -> Vec3<T> {
        Vec3::new(
            T::from_usize((self.dims[0] - 1) / 2).unwrap() * self.spacing.x,
            T::from_usize((self.dims[1] - 1) / 2).unwrap() * self.spacing.y,
            T::from_usize((self.dims[2] - 1) / 2).unwrap() * self.spacing.z,
        )
    }
}

/// Generated phantom: intensity volume, noiseless ground-truth mask, and
/// the analytic centerline.
#[derive(Debug, Clone)]
pub struct Phantom<T> {
    pub volume: Volume<T>,
    pub mask: Volume<T>,
    pub centerline: Vec<TubePolyline<T>>,
}

/// Build the phantom described by `spec`. Deterministic for a given
/// `rng_seed`.
pub fn generate<T: Real>(spec: &PhantomSpec<T>) -> Result<Phantom<T>> {
    spec.validate()?;
    let centerline = build_centerline(spec);
    let template = Volume::filled(spec.dims, spec.spacing, Vec3::zero(), T::zero());
    let mask = rasterize_tubes(&template, &centerline);

    let mut data: Vec<T> = mask
        .data()
        .iter()
        .map(|&m| {
            if m > T::of(0.5) {
                spec.vessel_intensity
            } else {
                spec.background_intensity
            }
        })
        .collect();

    if spec.noise_sigma > T::zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(spec.rng_seed, &[0x6e01]));
        let normal = Normal::new(0.0f64, spec.noise_sigma.as_f64())
            .map_err(|e| Error::InvalidParameter(format!("bad noise sigma: {e}")))?;
        for v in &mut data {
            *v += T::of(normal.sample(&mut rng));
        }
    }

    let volume = Volume::new(spec.dims, spec.spacing, Vec3::zero(), data)?;
    Ok(Phantom {
        volume,
        mask,
        centerline,
    })
}

fn build_centerline<T: Real>(spec: &PhantomSpec<T>) -> Vec<TubePolyline<T>> {
    let e = spec.extent();
    let center = spec.mid_voxel();
    match spec.kind {
        PhantomKind::StraightTube { radius } => {
            vec![vec![
                (Vec3::new(center.x, center.y, e.z * T::of(0.1)), radius),
                (Vec3::new(center.x, center.y, e.z * T::of(0.9)), radius),
            ]]
        }
        PhantomKind::Sinusoid {
            amplitude,
            wavelength,
            radius,
            bifurcations,
        } => sinusoid_centerline(spec, amplitude, wavelength, radius, bifurcations),
        PhantomKind::YTube { radius, angle } => y_centerline(spec, radius, angle),
        PhantomKind::LoopTube { radius } => loop_centerline(spec, radius),
        PhantomKind::Tree {
            depth,
            angle_min,
            angle_max,
            length_decay,
            radius_decay,
            root_radius,
            root_length,
        } => tree_centerline(
            spec,
            depth,
            angle_min,
            angle_max,
            length_decay,
            radius_decay,
            root_radius,
            root_length,
        ),
    }
}

fn sinusoid_centerline<T: Real>(
    spec: &PhantomSpec<T>,
    amplitude: T,
    wavelength: T,
    radius: T,
    bifurcations: u32,
) -> Vec<TubePolyline<T>> {
    let e = spec.extent();
    let center = spec.mid_voxel();
    let x0 = e.x * T::of(0.1);
    let x1 = e.x * T::of(0.9);
    let step = spec.spacing.x.min(T::one());
    let mut main: TubePolyline<T> = Vec::new();
    let mut x = x0;
    while x <= x1 {
        let y = center.y + amplitude * (T::of(std::f64::consts::TAU) * (x - x0) / wavelength).sin();
        main.push((Vec3::new(x, y, center.z), radius));
        x += step;
    }
    let mut tubes = vec![main.clone()];

    // Straight offshoots leaving the main course at evenly spaced stations,
    // alternating sides.
    for k in 0..bifurcations {
        let frac = T::from_u32(k + 1).unwrap() / T::from_u32(bifurcations + 1).unwrap();
        let idx = ((T::from_usize(main.len() - 1).unwrap() * frac).round())
            .to_usize()
            .unwrap()
            .min(main.len() - 1);
        let (start, _) = main[idx];
        let side = if k % 2 == 0 { T::one() } else { -T::one() };
        let dir = Vec3::new(T::of(0.55), side * T::of(0.8), T::zero())
            .normalized()
            .unwrap();
        let len = e.y * T::of(0.3);
        let end = clip_to_bounds(start, start + dir.scale(len), e, radius + spec.spacing.x);
        tubes.push(vec![(start, radius), (end, radius * T::of(0.8))]);
    }
    tubes
}

fn y_centerline<T: Real>(spec: &PhantomSpec<T>, radius: T, angle: T) -> Vec<TubePolyline<T>> {
    let e = spec.extent();
    let center = spec.mid_voxel();
    let z0 = e.z * T::of(0.1);
    let z_split = e.z * T::of(0.45);
    let stem_top = Vec3::new(center.x, center.y, z_split);
    let arm_len = (e.z * T::of(0.9) - z_split) / angle.cos();
    let mut tubes = vec![vec![
        (Vec3::new(center.x, center.y, z0), radius),
        (stem_top, radius),
    ]];
    for side in [T::one(), -T::one()] {
        let dir = Vec3::new(side * angle.sin(), T::zero(), angle.cos());
        let end = clip_to_bounds(stem_top, stem_top + dir.scale(arm_len), e, radius + spec.spacing.x);
        tubes.push(vec![(stem_top, radius), (end, radius * T::of(0.8))]);
    }
    tubes
}

fn loop_centerline<T: Real>(spec: &PhantomSpec<T>, radius: T) -> Vec<TubePolyline<T>> {
    let e = spec.extent();
    let center = spec.mid_voxel();
    let ring_r = e.x.min(e.z) * T::of(0.28);
    let ring_center = Vec3::new(center.x, center.y, center.z + ring_r * T::of(0.2));
    let bottom = Vec3::new(ring_center.x, ring_center.y, ring_center.z - ring_r);
    let stem = vec![
        (Vec3::new(center.x, center.y, e.z * T::of(0.08)), radius),
        (bottom, radius),
    ];
    // Two arcs from the bottom of the ring meeting at its top.
    let arc = |sign: f64| -> TubePolyline<T> {
        let steps = 32;
        (0..=steps)
            .map(|k| {
                let t = sign * std::f64::consts::PI * k as f64 / steps as f64;
                let p = Vec3::new(
                    ring_center.x + ring_r * T::of(t.sin()),
                    ring_center.y,
                    ring_center.z - ring_r * T::of(t.cos()),
                );
                (p, radius)
            })
            .collect()
    };
    vec![stem, arc(1.0), arc(-1.0)]
}

#[allow(clippy::too_many_arguments)]
fn tree_centerline<T: Real>(
    spec: &PhantomSpec<T>,
    depth: u32,
    angle_min: T,
    angle_max: T,
    length_decay: T,
    radius_decay: T,
    root_radius: T,
    root_length: T,
) -> Vec<TubePolyline<T>> {
    let e = spec.extent();
    let center = spec.mid_voxel();
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(spec.rng_seed, &[0x7233]));
    let mut tubes = Vec::new();

    // Breadth-first so segment order (and thus RNG consumption) is stable.
    struct Node<T> {
        start: Vec3<T>,
        dir: Vec3<T>,
        length: T,
        radius: T,
        level: u32,
    }
    let mut queue = std::collections::VecDeque::new();
    queue.push_back(Node {
        start: Vec3::new(center.x, center.y, e.z * T::of(0.08)),
        dir: Vec3::new(T::zero(), T::zero(), T::one()),
        length: root_length,
        radius: root_radius,
        level: 1,
    });

    use rand::Rng;
    while let Some(node) = queue.pop_front() {
        let margin = node.radius + spec.spacing.x;
        let end = clip_to_bounds(node.start, node.start + node.dir.scale(node.length), e, margin);
        tubes.push(vec![(node.start, node.radius), (end, node.radius)]);

        if node.level >= depth {
            continue;
        }
        let base_azimuth = T::of(rng.random::<f64>() * std::f64::consts::TAU);
        let rot = rotation_to(node.dir).expect("tree directions stay unit length");
        let (u, v) = (rot.rows[0], rot.rows[1]);
        for k in 0..2u32 {
            let tilt = angle_min + (angle_max - angle_min) * T::of(rng.random::<f64>());
            let azimuth = base_azimuth + T::of(k as f64 * std::f64::consts::PI);
            let dir = u.scale(tilt.sin() * azimuth.cos())
                + v.scale(tilt.sin() * azimuth.sin())
                + node.dir.scale(tilt.cos());
            queue.push_back(Node {
                start: end,
                dir,
                length: node.length * length_decay,
                radius: (node.radius * radius_decay).max(spec.spacing.x),
                level: node.level + 1,
            });
        }
    }
    tubes
}

/// Clamp `end` into the volume extent inset by `margin`, preserving the
/// segment direction (segments leaving the volume are shortened, not bent).
fn clip_to_bounds<T: Real>(start: Vec3<T>, end: Vec3<T>, extent: Vec3<T>, margin: T) -> Vec3<T> {
    let lo = margin;
    let mut t = T::one();
    for axis in 0..3 {
        let (s, d, hi) = match axis {
            0 => (start.x, end.x - start.x, extent.x - margin),
            1 => (start.y, end.y - start.y, extent.y - margin),
            _ => (start.z, end.z - start.z, extent.z - margin),
        };
        if d.abs() <= T::of(1e-12) {
            continue;
        }
        let target = if d > T::zero() { hi } else { lo };
        let tk = (target - s) / d;
        if tk >= T::zero() && tk < t {
            t = tk;
        }
    }
    start + (end - start).scale(t.max(T::zero()))
}

/// Write the centerline description: per polyline, `x y z radius` lines.
pub fn write_centerline<T: Real, W: std::io::Write>(
    tubes: &[TubePolyline<T>],
    mut w: W,
) -> std::io::Result<()> {
    writeln!(w, "# vesselflow centerline 1")?;
    writeln!(w, "polylines {}", tubes.len())?;
    for (k, tube) in tubes.iter().enumerate() {
        writeln!(w, "polyline {} points {}", k, tube.len())?;
        for (p, r) in tube {
            writeln!(w, "{} {} {} {}", p.x.as_f64(), p.y.as_f64(), p.z.as_f64(), r.as_f64())?;
        }
    }
    Ok(())
}
