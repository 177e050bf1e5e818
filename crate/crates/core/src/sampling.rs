//! Conical sampling cloud on concentric spherical calottes.
//!
//! A cone with apex at the seed and axis along the local vessel direction is
//! sampled on spherical shells of radius `l*s` (`l = 1..=L`). Each calotte
//! carries `M(l)` circumferences (the innermost degenerating to the single
//! axis point), and each circumference carries enough points that the arc
//! between neighbours is at most `s`. The canonical cloud is built around
//! the +z axis and rigidly placed at a seed with a given direction.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::vec3::{Mat3, Vec3};

/// Geometry of the sampling cone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeParams<T> {
    /// Aperture angle (radians), in `(0, pi/2]`.
    pub alpha: T,
    /// Calotte separation / sampling distance (mm).
    pub s: T,
    /// Number of calottes.
    pub layers: u32,
}

impl<T: Real> ConeParams<T> {
    pub fn new(alpha: T, s: T, layers: u32) -> Result<Self> {
        let half_pi = T::of(std::f64::consts::FRAC_PI_2);
        if !(alpha > T::zero() && alpha <= half_pi) {
            return Err(Error::InvalidParameter(format!(
                "cone aperture must be in (0, pi/2], got {alpha}"
            )));
        }
        if !(s > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "sampling distance must be positive, got {s}"
            )));
        }
        if layers == 0 {
            return Err(Error::InvalidParameter("cone needs at least one calotte".into()));
        }
        Ok(Self { alpha, s, layers })
    }

    /// Cone height `A = L*s`.
    pub fn height(&self) -> T {
        T::from_u32(self.layers).unwrap() * self.s
    }
}

/// (calotte, circumference, point) index of a sample point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SampleIndex {
    pub l: u32,
    pub m: u32,
    pub n: u32,
}

impl SampleIndex {
    pub fn new(l: u32, m: u32, n: u32) -> Self {
        Self { l, m, n }
    }
}

/// Number of circumferences on calotte `l`: `M(l) = ceil(l*alpha) + 1`.
pub fn circ_count<T: Real>(l: u32, alpha: T) -> u32 {
    let la = T::from_u32(l).unwrap() * alpha;
    la.ceil().to_u32().unwrap() + 1
}

/// Radius of the `m`-th circumference on calotte `l`:
/// `r(m,l) = l*s*sin(m/l)` (zero for the axis point `m = 0`).
pub fn circ_radius<T: Real>(m: u32, l: u32, s: T) -> T {
    if m == 0 {
        return T::zero();
    }
    let lf = T::from_u32(l).unwrap();
    let polar = T::from_u32(m).unwrap() / lf;
    lf * s * polar.sin()
}

/// Number of sample points on circumference `(m, l)`:
/// `N(m,l) = ceil(2*pi*r(m,l)/s)`, so adjacent arcs are at most `s`.
pub fn point_count<T: Real>(m: u32, l: u32, s: T) -> u32 {
    if m == 0 {
        return 1;
    }
    let r = circ_radius(m, l, s);
    let two_pi = T::of(std::f64::consts::TAU);
    (two_pi * r / s).ceil().to_u32().unwrap().max(1)
}

/// The canonical cloud around the +z axis: for each calotte the axis point
/// `(0, 0, l*s)` plus points on the sphere of radius `l*s` at polar angle
/// `m/l` and uniform azimuth `2*pi*n/N(m,l)`.
pub fn canonical_cloud<T: Real>(params: &ConeParams<T>) -> Vec<(SampleIndex, Vec3<T>)> {
    let mut points = Vec::new();
    let two_pi = T::of(std::f64::consts::TAU);
    for l in 1..=params.layers {
        let lf = T::from_u32(l).unwrap();
        let shell = lf * params.s;
        points.push((SampleIndex::new(l, 0, 0), Vec3::new(T::zero(), T::zero(), shell)));
        let m_count = circ_count(l, params.alpha);
        for m in 1..m_count {
            let polar = T::from_u32(m).unwrap() / lf;
            let r = shell * polar.sin();
            let z = shell * polar.cos();
            let n_count = point_count(m, l, params.s);
            for n in 0..n_count {
                let psi = two_pi * T::from_u32(n).unwrap() / T::from_u32(n_count).unwrap();
                points.push((
                    SampleIndex::new(l, m, n),
                    Vec3::new(r * psi.cos(), r * psi.sin(), z),
                ));
            }
        }
    }
    points
}

/// Orthonormal matrix whose third row is `axis^T`; rows one and two are a
/// perpendicular pair (`V1` in the xy-plane when possible, `V2 = axis x V1`).
/// Near-vertical axes fall back to `V1 = (1,0,0)`.
pub fn rotation_to<T: Real>(axis: Vec3<T>) -> Result<Mat3<T>> {
    let tol = T::of(1e-9);
    if (axis.norm() - T::one()).abs() > tol {
        return Err(Error::InvalidParameter(format!(
            "rotation axis must be a unit vector, |axis| = {}",
            axis.norm()
        )));
    }
    let eps = T::of(1e-8);
    let v1 = if axis.x.abs() < eps && axis.y.abs() < eps {
        Vec3::new(T::one(), T::zero(), T::zero())
    } else {
        Vec3::new(-axis.y, axis.x, T::zero())
            .normalized()
            .expect("xy component is nonzero")
    };
    let v2 = axis.cross(v1);
    Ok(Mat3::from_rows(v1, v2, axis))
}

/// The canonical cloud rigidly placed at `apex` with the canonical +z axis
/// mapped onto `axis`.
#[derive(Debug, Clone)]
pub struct SampleCloud<T> {
    pub params: ConeParams<T>,
    pub apex: Vec3<T>,
    pub axis: Vec3<T>,
    pub points: Vec<(SampleIndex, Vec3<T>)>,
}

/// Place the canonical cloud at `seed`, rotating +z onto `axis` (the
/// transpose of [`rotation_to`]'s row convention) and translating by the
/// seed position.
pub fn place_cloud<T: Real>(params: &ConeParams<T>, seed: Vec3<T>, axis: Vec3<T>) -> Result<SampleCloud<T>> {
    let rot = rotation_to(axis)?;
    let points = canonical_cloud(params)
        .into_iter()
        .map(|(idx, p)| (idx, rot.transpose_mul_vec(p) + seed))
        .collect();
    Ok(SampleCloud {
        params: *params,
        apex: seed,
        axis,
        points,
    })
}

impl<T: Real> SampleCloud<T> {
    /// Debug dump, one `x y z l m n` line per point.
    pub fn write_points<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (idx, p) in &self.points {
            writeln!(
                w,
                "{} {} {} {} {} {}",
                p.x.as_f64(),
                p.y.as_f64(),
                p.z.as_f64(),
                idx.l,
                idx.m,
                idx.n
            )?;
        }
        Ok(())
    }
}
