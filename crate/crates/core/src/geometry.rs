//! Point clouds, distance oracles and deterministic dataset generators.
//!
//! All generators draw from [`ChaCha8Rng`] seeded through
//! `SeedableRng::seed_from_u64`, so a seed reproduces the same cloud bit for
//! bit on every platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Random number generator used by every seeded routine in the crate.
pub type KRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> KRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// How the distance from a point to the domain boundary is defined.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum BoundaryPolicy {
    /// Whole space: every boundary distance is `+inf`.
    #[default]
    None,
    /// The unit box `[0,1]^d`.
    UnitBox,
    /// One nonnegative distance per point.
    Explicit(Vec<f64>),
}

/// `N` distinct points in `d` dimensions, stored row-major.
///
/// Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    coords: Vec<f64>,
    n: usize,
    dim: usize,
    boundary: BoundaryPolicy,
}

impl PointCloud {
    /// Builds a cloud from row-major coordinates.
    ///
    /// Rejects empty input, non-finite coordinates and exactly coinciding
    /// points.
    pub fn new(coords: Vec<f64>, dim: usize, boundary: BoundaryPolicy) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension("d must be at least 1".into()));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::InvalidDimension(format!(
                "{} coordinates do not split into rows of length {dim}",
                coords.len()
            )));
        }
        let n = coords.len() / dim;
        if n == 0 {
            return Err(Error::EmptyCloud);
        }
        if let Some(pos) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite { point: pos / dim, axis: pos % dim });
        }
        match &boundary {
            BoundaryPolicy::None => {}
            BoundaryPolicy::UnitBox => {
                if let Some(pos) = coords.iter().position(|c| !(0.0..=1.0).contains(c)) {
                    return Err(Error::Boundary(format!(
                        "point {} lies outside the unit box",
                        pos / dim
                    )));
                }
            }
            BoundaryPolicy::Explicit(dists) => {
                if dists.len() != n {
                    return Err(Error::Boundary(format!(
                        "expected {n} boundary distances, got {}",
                        dists.len()
                    )));
                }
                if let Some(i) = dists.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
                    return Err(Error::Boundary(format!(
                        "boundary distance of point {i} is not a finite nonnegative number"
                    )));
                }
            }
        }

        let cloud = PointCloud { coords, n, dim, boundary };
        cloud.check_duplicates()?;
        Ok(cloud)
    }

    fn check_duplicates(&self) -> Result<()> {
        let mut idx: Vec<usize> = (0..self.n).collect();
        let cmp = |a: &usize, b: &usize| {
            let (pa, pb) = (self.point(*a), self.point(*b));
            pa.iter()
                .zip(pb)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        };
        idx.sort_unstable_by(cmp);
        for w in idx.windows(2) {
            if self.point(w[0]) == self.point(w[1]) {
                let (a, b) = (w[0].min(w[1]), w[0].max(w[1]));
                return Err(Error::DuplicatePoint { first: a, second: b });
            }
        }
        Ok(())
    }

    /// Returns a copy of this cloud with a different boundary policy.
    pub fn with_boundary(self, boundary: BoundaryPolicy) -> Result<Self> {
        PointCloud::new(self.coords, self.dim, boundary)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn boundary(&self) -> &BoundaryPolicy {
        &self.boundary
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Coordinates of point `i`. Panics if `i` is out of range.
    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i < self.n {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange { index: i, len: self.n })
        }
    }

    /// Euclidean distance between points `i` and `j`.
    pub fn pairwise_dist(&self, i: usize, j: usize) -> Result<f64> {
        self.check_index(i)?;
        self.check_index(j)?;
        Ok(self.dist(i, j))
    }

    /// Unchecked variant of [`pairwise_dist`](Self::pairwise_dist) for hot loops.
    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        euclidean(self.point(i), self.point(j))
    }

    /// Distance from point `i` to the boundary; `+inf` when there is none.
    pub fn dist_to_boundary(&self, i: usize) -> Result<f64> {
        self.check_index(i)?;
        Ok(self.boundary_dist(i))
    }

    #[inline]
    pub(crate) fn boundary_dist(&self, i: usize) -> f64 {
        match &self.boundary {
            BoundaryPolicy::None => f64::INFINITY,
            BoundaryPolicy::UnitBox => self
                .point(i)
                .iter()
                .map(|&x| x.min(1.0 - x))
                .fold(f64::INFINITY, f64::min),
            BoundaryPolicy::Explicit(d) => d[i],
        }
    }
}

#[inline]
pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let t = x - y;
            t * t
        })
        .sum::<f64>()
        .sqrt()
}

/// `n` i.i.d. uniform points in `[0,1]^d` (boundary policy `None`).
pub fn gen_uniform(n: usize, d: usize, seed: u64) -> Result<PointCloud> {
    if n == 0 {
        return Err(Error::EmptyCloud);
    }
    if d == 0 {
        return Err(Error::InvalidDimension("d must be at least 1".into()));
    }
    let mut rng = rng_from_seed(seed);
    let coords = (0..n * d).map(|_| rng.gen::<f64>()).collect();
    PointCloud::new(coords, d, BoundaryPolicy::None)
}

/// Uniform points in the unit square lifted onto the surface
/// `x3 = -dz sin(6 x1) cos(2 (1 - x2)) + 1e-3 xi`, with `xi` standard normal.
///
/// The noise term is fixed at `1e-3` regardless of `dz`; pass
/// `noise = false` to drop it.
pub fn gen_deformed_manifold(n: usize, dz: f64, seed: u64, noise: bool) -> Result<PointCloud> {
    if n == 0 {
        return Err(Error::EmptyCloud);
    }
    if !dz.is_finite() {
        return Err(Error::InvalidParameter("dz must be finite".into()));
    }
    let mut rng = rng_from_seed(seed);
    let mut coords = Vec::with_capacity(3 * n);
    for _ in 0..n {
        let x1: f64 = rng.gen();
        let x2: f64 = rng.gen();
        let xi: f64 = rng.sample(StandardNormal);
        let mut x3 = -dz * (6.0 * x1).sin() * (2.0 * (1.0 - x2)).cos();
        if noise {
            x3 += xi * 1e-3;
        }
        coords.extend_from_slice(&[x1, x2, x3]);
    }
    PointCloud::new(coords, 3, BoundaryPolicy::None)
}

/// Cell-centred regular grid with `m` points per axis in `[0,1]^d`,
/// lexicographic order, `UnitBox` boundary.
pub fn gen_grid(m: usize, d: usize) -> Result<PointCloud> {
    if m == 0 {
        return Err(Error::EmptyCloud);
    }
    if d == 0 {
        return Err(Error::InvalidDimension("d must be at least 1".into()));
    }
    let n = m
        .checked_pow(d as u32)
        .ok_or_else(|| Error::InvalidParameter("grid too large".into()))?;
    let mut coords = Vec::with_capacity(n * d);
    for flat in 0..n {
        let mut rest = flat;
        let mut row = vec![0.0; d];
        for axis in (0..d).rev() {
            row[axis] = ((rest % m) as f64 + 0.5) / m as f64;
            rest /= m;
        }
        coords.extend(row);
    }
    PointCloud::new(coords, d, BoundaryPolicy::UnitBox)
}

/// `n` equispaced points `(i + 0.5) / n` on the unit interval, `UnitBox` boundary.
pub fn gen_line(n: usize) -> Result<PointCloud> {
    if n == 0 {
        return Err(Error::EmptyCloud);
    }
    let coords = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
    PointCloud::new(coords, 1, BoundaryPolicy::UnitBox)
}
