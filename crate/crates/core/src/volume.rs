//! 3D scalar volumes with anisotropic physical spacing.
//!
//! Data is stored x-fastest: `index = x + dims[0]*(y + dims[1]*z)`. A point
//! is inside the volume when its continuous voxel coordinate lies in
//! `[0, dim-1]` on every axis; sampling outside yields `None`, which callers
//! treat as minimal vesselness so cones degrade gracefully at the border.

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::vec3::Vec3;

/// Immutable 3D scalar grid with physical spacing (mm) and world origin.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume<T> {
    dims: [usize; 3],
    spacing: Vec3<T>,
    origin: Vec3<T>,
    data: Vec<T>,
    intensity_range: (T, T),
    // cached for the sampling hot path
    inv_spacing: Vec3<T>,
    max_voxel: Vec3<T>,
}

impl<T: Real> Volume<T> {
    /// Build a volume, validating the data length and spacing signs.
    pub fn new(dims: [usize; 3], spacing: Vec3<T>, origin: Vec3<T>, data: Vec<T>) -> Result<Self> {
        let n = dims[0]
            .checked_mul(dims[1])
            .and_then(|v| v.checked_mul(dims[2]))
            .ok_or_else(|| Error::InvalidParameter("volume dimensions overflow".into()))?;
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidParameter(format!(
                "volume dimensions must be positive, got {dims:?}"
            )));
        }
        if data.len() != n {
            return Err(Error::DataLengthMismatch {
                expected: n,
                actual: data.len(),
            });
        }
        if spacing.x <= T::zero() || spacing.y <= T::zero() || spacing.z <= T::zero() {
            return Err(Error::InvalidParameter(format!(
                "spacing components must be positive, got {spacing:?}"
            )));
        }
        let mut lo = T::infinity();
        let mut hi = T::neg_infinity();
        for &v in &data {
            if v < lo {
                lo = v;
            }
            if v > hi {
                hi = v;
            }
        }
        let as_t = |d: usize| T::from_usize(d - 1).unwrap();
        Ok(Self {
            dims,
            spacing,
            origin,
            data,
            intensity_range: (lo, hi),
            inv_spacing: Vec3::new(T::one() / spacing.x, T::one() / spacing.y, T::one() / spacing.z),
            max_voxel: Vec3::new(as_t(dims[0]), as_t(dims[1]), as_t(dims[2])),
        })
    }

    /// All-constant volume, mostly for tests and mask templates.
    pub fn filled(dims: [usize; 3], spacing: Vec3<T>, origin: Vec3<T>, value: T) -> Self {
        let n = dims[0] * dims[1] * dims[2];
        Self::new(dims, spacing, origin, vec![value; n]).expect("filled volume is consistent")
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> Vec3<T> {
        self.spacing
    }

    pub fn origin(&self) -> Vec3<T> {
        self.origin
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// (min, max) over all voxels, computed once at construction.
    pub fn intensity_range(&self) -> (T, T) {
        self.intensity_range
    }

    pub fn max_spacing(&self) -> T {
        self.spacing.x.max(self.spacing.y).max(self.spacing.z)
    }

    pub fn min_spacing(&self) -> T {
        self.spacing.x.min(self.spacing.y).min(self.spacing.z)
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize, z: usize) -> T {
        self.data[self.index(x, y, z)]
    }

    /// World position of the voxel center `(x, y, z)`.
    pub fn voxel_center(&self, x: usize, y: usize, z: usize) -> Vec3<T> {
        self.voxel_to_world(Vec3::new(
            T::from_usize(x).unwrap(),
            T::from_usize(y).unwrap(),
            T::from_usize(z).unwrap(),
        ))
    }

    /// Continuous voxel coordinates of a world point: `(p - origin) / spacing`.
    pub fn world_to_voxel(&self, p: Vec3<T>) -> Vec3<T> {
        Vec3::new(
            (p.x - self.origin.x) * self.inv_spacing.x,
            (p.y - self.origin.y) * self.inv_spacing.y,
            (p.z - self.origin.z) * self.inv_spacing.z,
        )
    }

    /// Inverse of [`world_to_voxel`](Self::world_to_voxel).
    pub fn voxel_to_world(&self, v: Vec3<T>) -> Vec3<T> {
        Vec3::new(
            v.x * self.spacing.x + self.origin.x,
            v.y * self.spacing.y + self.origin.y,
            v.z * self.spacing.z + self.origin.z,
        )
    }

    /// True when the continuous voxel coordinate lies in `[0, dim-1]` on
    /// every axis.
    pub fn contains(&self, p: Vec3<T>) -> bool {
        let v = self.world_to_voxel(p);
        let inside = |c: T, dim: usize| c >= T::zero() && c <= T::from_usize(dim - 1).unwrap();
        inside(v.x, self.dims[0]) && inside(v.y, self.dims[1]) && inside(v.z, self.dims[2])
    }

    /// Trilinear interpolation of the 8 voxels surrounding `p`, or `None`
    /// when `p` is outside the volume.
    #[inline]
    pub fn sample_trilinear(&self, p: Vec3<T>) -> Option<T> {
        let v = self.world_to_voxel(p);
        let one = T::one();
        if !(v.x >= T::zero() && v.x <= self.max_voxel.x
            && v.y >= T::zero() && v.y <= self.max_voxel.y
            && v.z >= T::zero() && v.z <= self.max_voxel.z)
        {
            return None;
        }
        // Coordinates are non-negative here, so trunc == floor.
        let x0 = v.x.trunc();
        let y0 = v.y.trunc();
        let z0 = v.z.trunc();
        let xi = x0.to_usize().unwrap_or(0).min(self.dims[0] - 1);
        let yi = y0.to_usize().unwrap_or(0).min(self.dims[1] - 1);
        let zi = z0.to_usize().unwrap_or(0).min(self.dims[2] - 1);
        let xj = (xi + 1).min(self.dims[0] - 1);
        let yj = (yi + 1).min(self.dims[1] - 1);
        let zj = (zi + 1).min(self.dims[2] - 1);
        let fx = v.x - x0;
        let fy = v.y - y0;
        let fz = v.z - z0;

        let c000 = self.at(xi, yi, zi);
        let c100 = self.at(xj, yi, zi);
        let c010 = self.at(xi, yj, zi);
        let c110 = self.at(xj, yj, zi);
        let c001 = self.at(xi, yi, zj);
        let c101 = self.at(xj, yi, zj);
        let c011 = self.at(xi, yj, zj);
        let c111 = self.at(xj, yj, zj);

        let c00 = c000 * (one - fx) + c100 * fx;
        let c10 = c010 * (one - fx) + c110 * fx;
        let c01 = c001 * (one - fx) + c101 * fx;
        let c11 = c011 * (one - fx) + c111 * fx;
        let c0 = c00 * (one - fy) + c10 * fy;
        let c1 = c01 * (one - fy) + c11 * fy;
        Some(c0 * (one - fz) + c1 * fz)
    }

    /// Number of voxels strictly above `threshold`.
    pub fn count_above(&self, threshold: T) -> usize {
        self.data.iter().filter(|&&v| v > threshold).count()
    }
}

/// A tube centerline: polyline vertices paired with local radii (mm).
pub type TubePolyline<T> = Vec<(Vec3<T>, T)>;

/// Rasterize a set of tube polylines into a binary volume shaped like
/// `template` (voxels within the linearly interpolated radius of any
/// segment are 1, all others 0).
pub fn rasterize_tubes<T: Real>(template: &Volume<T>, tubes: &[TubePolyline<T>]) -> Volume<T> {
    let dims = template.dims();
    let spacing = template.spacing();
    let origin = template.origin();
    let mut data = vec![T::zero(); dims[0] * dims[1] * dims[2]];

    for tube in tubes {
        if tube.len() == 1 {
            // Degenerate single vertex: a ball.
            let (c, r) = tube[0];
            paint_segment(&mut data, dims, spacing, origin, c, c, r, r);
        }
        for w in tube.windows(2) {
            let (a, ra) = w[0];
            let (b, rb) = w[1];
            paint_segment(&mut data, dims, spacing, origin, a, b, ra, rb);
        }
    }

    Volume::new(dims, spacing, origin, data).expect("mask matches template dims")
}

/// Mark voxels within the (linearly varying) radius of segment a-b.
fn paint_segment<T: Real>(
    data: &mut [T],
    dims: [usize; 3],
    spacing: Vec3<T>,
    origin: Vec3<T>,
    a: Vec3<T>,
    b: Vec3<T>,
    ra: T,
    rb: T,
) {
    let rmax = ra.max(rb);
    // Bounding box of the capsule in voxel indices.
    let lo = Vec3::new(
        (a.x.min(b.x) - rmax - origin.x) / spacing.x,
        (a.y.min(b.y) - rmax - origin.y) / spacing.y,
        (a.z.min(b.z) - rmax - origin.z) / spacing.z,
    );
    let hi = Vec3::new(
        (a.x.max(b.x) + rmax - origin.x) / spacing.x,
        (a.y.max(b.y) + rmax - origin.y) / spacing.y,
        (a.z.max(b.z) + rmax - origin.z) / spacing.z,
    );
    let clamp_idx = |c: T, dim: usize, up: bool| -> usize {
        let c = if up { c.ceil() } else { c.floor() };
        let c = c.max(T::zero());
        let c = c.min(T::from_usize(dim - 1).unwrap());
        c.to_usize().unwrap_or(0)
    };
    let (x0, x1) = (clamp_idx(lo.x, dims[0], false), clamp_idx(hi.x, dims[0], true));
    let (y0, y1) = (clamp_idx(lo.y, dims[1], false), clamp_idx(hi.y, dims[1], true));
    let (z0, z1) = (clamp_idx(lo.z, dims[2], false), clamp_idx(hi.z, dims[2], true));

    let ab = b - a;
    let len_sq = ab.norm_sq();
    for z in z0..=z1 {
        for y in y0..=y1 {
            for x in x0..=x1 {
                let p = Vec3::new(
                    T::from_usize(x).unwrap() * spacing.x + origin.x,
                    T::from_usize(y).unwrap() * spacing.y + origin.y,
                    T::from_usize(z).unwrap() * spacing.z + origin.z,
                );
                let t = if len_sq > T::zero() {
                    ((p - a).dot(ab) / len_sq).max(T::zero()).min(T::one())
                } else {
                    T::zero()
                };
                let closest = a + ab.scale(t);
                let r = ra + (rb - ra) * t;
                if p.distance(closest) <= r {
                    data[x + dims[0] * (y + dims[1] * z)] = T::one();
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_volume(dims: [usize; 3], data: Vec<f64>) -> Volume<f64> {
        Volume::new(dims, Vec3::of(1.0, 1.0, 1.0), Vec3::zero(), data).unwrap()
    }

    #[test]
    fn rejects_length_mismatch() {
        let err = Volume::new(
            [4, 4, 4],
            Vec3::<f64>::of(1.0, 1.0, 1.0),
            Vec3::zero(),
            vec![0.0; 63],
        )
        .unwrap_err();
        assert!(matches!(err, Error::DataLengthMismatch { expected: 64, actual: 63 }));
    }

    #[test]
    fn world_voxel_round_trip() {
        let v = Volume::filled([8, 8, 8], Vec3::<f64>::of(2.0, 1.0, 0.5), Vec3::of(10.0, 0.0, -3.0), 0.0);
        assert_eq!(v.world_to_voxel(Vec3::of(14.0, 0.0, -3.0)), Vec3::of(2.0, 0.0, 0.0));
        let p = Vec3::of(1.3, 4.7, -2.9);
        let back = v.voxel_to_world(v.world_to_voxel(p));
        assert!(back.distance(p) < 1e-12);
    }

    #[test]
    fn trilinear_identity_at_voxel_centers() {
        let data: Vec<f64> = (0..27).map(|i| i as f64).collect();
        let v = unit_volume([3, 3, 3], data);
        for z in 0..3 {
            for y in 0..3 {
                for x in 0..3 {
                    let p = v.voxel_center(x, y, z);
                    assert_eq!(v.sample_trilinear(p).unwrap(), v.at(x, y, z));
                }
            }
        }
    }

    #[test]
    fn trilinear_midpoint() {
        let mut data = vec![0.0; 8];
        data[1] = 10.0; // voxel (1,0,0)
        let v = unit_volume([2, 2, 2], data);
        let val = v.sample_trilinear(Vec3::of(0.5, 0.0, 0.0)).unwrap();
        assert!((val - 5.0).abs() < 1e-12);
    }

    #[test]
    fn trilinear_constant_field() {
        let v = Volume::filled([5, 4, 3], Vec3::<f64>::of(1.0, 2.0, 3.0), Vec3::zero(), 7.5);
        let p = Vec3::of(1.7, 2.2, 4.1);
        assert!((v.sample_trilinear(p).unwrap() - 7.5).abs() < 1e-12);
    }

    #[test]
    fn trilinear_exact_on_affine_field() {
        // I(p) = 2x - 3y + 0.5z + 4 sampled at anisotropic spacing.
        let dims = [6, 5, 4];
        let spacing = Vec3::<f64>::of(0.7, 1.3, 2.1);
        let origin = Vec3::of(-1.0, 2.0, 0.5);
        let f = |p: Vec3<f64>| 2.0 * p.x - 3.0 * p.y + 0.5 * p.z + 4.0;
        let mut data = Vec::new();
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                for x in 0..dims[0] {
                    let p = Vec3::of(
                        x as f64 * spacing.x + origin.x,
                        y as f64 * spacing.y + origin.y,
                        z as f64 * spacing.z + origin.z,
                    );
                    data.push(f(p));
                }
            }
        }
        let v = Volume::new(dims, spacing, origin, data).unwrap();
        let probes = [
            Vec3::of(0.1, 2.5, 1.0),
            Vec3::of(1.0, 4.0, 3.3),
            Vec3::of(2.49, 6.0, 5.5),
        ];
        for p in probes {
            let got = v.sample_trilinear(p).unwrap();
            assert!((got - f(p)).abs() < 1e-9, "affine mismatch at {p:?}: {got}");
        }
    }

    #[test]
    fn outside_returns_none() {
        let v = Volume::filled([4, 4, 4], Vec3::<f64>::of(1.0, 1.0, 1.0), Vec3::zero(), 1.0);
        assert!(v.sample_trilinear(Vec3::of(-0.1, 0.0, 0.0)).is_none());
        assert!(v.sample_trilinear(Vec3::of(3.1, 0.0, 0.0)).is_none());
        assert!(v.sample_trilinear(Vec3::of(3.0, 3.0, 3.0)).is_some());
    }

    #[test]
    fn rasterized_cylinder_volume_close_to_analytic() {
        let template = Volume::filled([40, 40, 40], Vec3::<f64>::of(1.0, 1.0, 1.0), Vec3::zero(), 0.0);
        let tube: TubePolyline<f64> = vec![
            (Vec3::of(20.0, 20.0, 5.0), 2.0),
            (Vec3::of(20.0, 20.0, 35.0), 2.0),
        ];
        let mask = rasterize_tubes(&template, &[tube]);
        let count = mask.count_above(0.5) as f64;
        let analytic = std::f64::consts::PI * 4.0 * 30.0;
        assert!(
            (count - analytic).abs() / analytic < 0.15,
            "voxel count {count} vs analytic {analytic}"
        );
    }

    #[test]
    fn mask_monotone_in_radius() {
        let template = Volume::filled([24, 24, 24], Vec3::<f64>::of(1.0, 1.0, 1.0), Vec3::zero(), 0.0);
        let tube = |r: f64| -> TubePolyline<f64> {
            vec![(Vec3::of(12.0, 12.0, 4.0), r), (Vec3::of(12.0, 12.0, 20.0), r)]
        };
        let small = rasterize_tubes(&template, &[tube(3.0)]);
        let big = rasterize_tubes(&template, &[tube(3.3)]);
        for (s, b) in small.data().iter().zip(big.data().iter()) {
            assert!(*b >= *s, "inflated mask must be a superset");
        }
    }
}
