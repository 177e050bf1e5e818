//! Segmentation quality metrics: Dice overlap and surface distances.
//!
//! Surfaces are the 6-connectivity boundary voxels of a binary mask
//! (foreground voxels with at least one background or out-of-volume face
//! neighbour); distances are measured between voxel centers in mm. The RMS
//! distance pools both directions (a to b and b to a) so it is symmetric,
//! and the Hausdorff distance is the larger of the two directed maxima.

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::vec3::Vec3;
use crate::volume::Volume;

const FOREGROUND: f64 = 0.5;

fn check_dims<T: Real>(a: &Volume<T>, b: &Volume<T>) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::DimsMismatch {
            a: a.dims(),
            b: b.dims(),
        });
    }
    Ok(())
}

/// Dice overlap `2|A n B| / (|A| + |B|)`; 1 when both masks are empty.
pub fn dice<T: Real>(a: &Volume<T>, b: &Volume<T>) -> Result<T> {
    check_dims(a, b)?;
    let thr = T::of(FOREGROUND);
    let mut inter = 0usize;
    let mut total = 0usize;
    for (x, y) in a.data().iter().zip(b.data().iter()) {
        let fa = *x > thr;
        let fb = *y > thr;
        inter += (fa && fb) as usize;
        total += fa as usize + fb as usize;
    }
    if total == 0 {
        return Ok(T::one());
    }
    Ok(T::of(2.0) * T::from_usize(inter).unwrap() / T::from_usize(total).unwrap())
}

/// World coordinates of the 6-connectivity boundary voxel centers of a
/// binary mask.
pub fn surface_points<T: Real>(mask: &Volume<T>) -> Vec<Vec3<T>> {
    let thr = T::of(FOREGROUND);
    let [nx, ny, nz] = mask.dims();
    let mut out = Vec::new();
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                if mask.at(x, y, z) <= thr {
                    continue;
                }
                let neighbours = [
                    (x.wrapping_sub(1), y, z),
                    (x + 1, y, z),
                    (x, y.wrapping_sub(1), z),
                    (x, y + 1, z),
                    (x, y, z.wrapping_sub(1)),
                    (x, y, z + 1),
                ];
                let boundary = neighbours.iter().any(|&(i, j, k)| {
                    i >= nx || j >= ny || k >= nz || mask.at(i, j, k) <= thr
                });
                if boundary {
                    out.push(mask.voxel_center(x, y, z));
                }
            }
        }
    }
    out
}

/// Uniform-grid bucket index for nearest-neighbour queries over a point
/// set.
struct NearestGrid<T> {
    cell: T,
    lo: Vec3<T>,
    dims: [usize; 3],
    buckets: Vec<Vec<Vec3<T>>>,
}

impl<T: Real> NearestGrid<T> {
    fn build(points: &[Vec3<T>], cell: T) -> Self {
        let mut lo = points[0];
        let mut hi = points[0];
        for p in points {
            lo = Vec3::new(lo.x.min(p.x), lo.y.min(p.y), lo.z.min(p.z));
            hi = Vec3::new(hi.x.max(p.x), hi.y.max(p.y), hi.z.max(p.z));
        }
        let dim = |l: T, h: T| ((h - l) / cell).floor().to_usize().unwrap_or(0) + 1;
        let dims = [dim(lo.x, hi.x), dim(lo.y, hi.y), dim(lo.z, hi.z)];
        let mut buckets = vec![Vec::new(); dims[0] * dims[1] * dims[2]];
        let mut grid = Self { cell, lo, dims, buckets: Vec::new() };
        for p in points {
            let idx = grid.bucket_of(*p);
            buckets[idx].push(*p);
        }
        grid.buckets = buckets;
        grid
    }

    fn coord(&self, p: Vec3<T>) -> [isize; 3] {
        let c = |v: T, l: T, d: usize| -> isize {
            let k = ((v - l) / self.cell).floor().to_isize().unwrap_or(0);
            k.clamp(0, d as isize - 1)
        };
        [
            c(p.x, self.lo.x, self.dims[0]),
            c(p.y, self.lo.y, self.dims[1]),
            c(p.z, self.lo.z, self.dims[2]),
        ]
    }

    fn bucket_of(&self, p: Vec3<T>) -> usize {
        let [i, j, k] = self.coord(p);
        i as usize + self.dims[0] * (j as usize + self.dims[1] * k as usize)
    }

    /// Exact nearest distance from `p` to the point set, searching outward
    /// in Chebyshev rings until no closer point is possible.
    fn nearest(&self, p: Vec3<T>) -> T {
        let [ci, cj, ck] = self.coord(p);
        let mut best = T::infinity();
        let max_ring = self.dims.iter().max().copied().unwrap_or(1) as isize + 1;
        for ring in 0..=max_ring {
            // Once a match was found, rings beyond best/cell cannot improve.
            if best.is_finite() {
                let bound = T::from_isize(ring - 1).unwrap() * self.cell;
                if bound > best {
                    break;
                }
            }
            for i in (ci - ring).max(0)..=(ci + ring).min(self.dims[0] as isize - 1) {
                for j in (cj - ring).max(0)..=(cj + ring).min(self.dims[1] as isize - 1) {
                    for k in (ck - ring).max(0)..=(ck + ring).min(self.dims[2] as isize - 1) {
                        let on_shell = (i - ci).abs().max((j - cj).abs()).max((k - ck).abs()) == ring;
                        if !on_shell {
                            continue;
                        }
                        let b = i as usize + self.dims[0] * (j as usize + self.dims[1] * k as usize);
                        for q in &self.buckets[b] {
                            let d = p.distance(*q);
                            if d < best {
                                best = d;
                            }
                        }
                    }
                }
            }
        }
        best
    }
}

/// Nearest-surface distances from every point of `from` to the set `to`.
fn directed_distances<T: Real>(from: &[Vec3<T>], to: &[Vec3<T>], cell: T) -> Vec<T> {
    let grid = NearestGrid::build(to, cell);
    from.iter().map(|p| grid.nearest(*p)).collect()
}

fn surfaces<T: Real>(a: &Volume<T>, b: &Volume<T>) -> Result<(Vec<Vec3<T>>, Vec<Vec3<T>>, T)> {
    check_dims(a, b)?;
    let sa = surface_points(a);
    let sb = surface_points(b);
    if sa.is_empty() || sb.is_empty() {
        return Err(Error::EmptyMask);
    }
    let cell = a.max_spacing().max(b.max_spacing());
    Ok((sa, sb, cell))
}

/// Symmetric RMS of nearest-surface distances (both directions pooled), in
/// mm.
pub fn surface_rms<T: Real>(a: &Volume<T>, b: &Volume<T>) -> Result<T> {
    let (sa, sb, cell) = surfaces(a, b)?;
    let mut sum_sq = T::zero();
    let mut count = 0usize;
    for d in directed_distances(&sa, &sb, cell) {
        sum_sq += d * d;
        count += 1;
    }
    for d in directed_distances(&sb, &sa, cell) {
        sum_sq += d * d;
        count += 1;
    }
    Ok((sum_sq / T::from_usize(count).unwrap()).sqrt())
}

/// Hausdorff distance: max of the two directed max-min surface distances,
/// in mm.
pub fn hausdorff<T: Real>(a: &Volume<T>, b: &Volume<T>) -> Result<T> {
    let (sa, sb, cell) = surfaces(a, b)?;
    let max = |v: Vec<T>| v.into_iter().fold(T::zero(), |m, d| m.max(d));
    let ab = max(directed_distances(&sa, &sb, cell));
    let ba = max(directed_distances(&sb, &sa, cell));
    Ok(ab.max(ba))
}
