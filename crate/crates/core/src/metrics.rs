//! Accuracy measures for a factor and the homogeneity of a point cloud.

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{rng_from_seed, BoundaryPolicy, PointCloud};
use crate::ichol::{SparseLowerFactor, Timings};
use crate::kernels::{DenseMatrix, KernelSpec};
use crate::ordering::{invert_permutation, DEFAULT_ORACLE_CAP};

/// Default number of sampled pairs (capped at `N^2`).
pub const DEFAULT_SAMPLES: usize = 500_000;
/// Default number of repetitions of the sampled estimate.
pub const DEFAULT_REPS: usize = 50;
/// Grid points per axis used for the empty-ball radius in
/// [`homogeneity_delta`].
pub const DEFAULT_GRID: usize = 64;
/// Interior box `[lo, hi]^d` used by the interior error.
pub const INTERIOR: (f64, f64) = (0.05, 0.95);

pub fn default_samples(n: usize) -> usize {
    DEFAULT_SAMPLES.min(n.saturating_mul(n))
}

/// Mean and standard deviation of the sampled relative error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport {
    pub mean_e: f64,
    /// Sample standard deviation over the repetitions (0 for one rep).
    pub std_e: f64,
    pub m: usize,
    pub reps: usize,
    pub interior: bool,
    pub seed: u64,
}

/// Rows of a lower factor, for `(L L^T)_{ij}` as a sparse row dot product.
struct RowView {
    rank: Vec<usize>,
    rowptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl RowView {
    fn new(f: &SparseLowerFactor) -> Result<Self> {
        let n = f.n();
        let (cp, ri) = (f.pattern.colptr(), f.pattern.rowidx());
        let mut rowptr = vec![0usize; n + 1];
        for &r in ri {
            rowptr[r + 1] += 1;
        }
        for i in 0..n {
            rowptr[i + 1] += rowptr[i];
        }
        let mut next = rowptr.clone();
        let mut cols = vec![0; ri.len()];
        let mut vals = vec![0.0; ri.len()];
        // Columns are visited in increasing order, so every row comes out
        // sorted by column.
        for j in 0..n {
            for p in cp[j]..cp[j + 1] {
                let slot = &mut next[ri[p]];
                cols[*slot] = j;
                vals[*slot] = f.values[p];
                *slot += 1;
            }
        }
        Ok(RowView { rank: invert_permutation(&f.perm)?, rowptr, cols, vals })
    }

    /// `(L L^T)` at original indices `a`, `b`.
    fn llt(&self, a: usize, b: usize) -> f64 {
        let (i, j) = (self.rank[a], self.rank[b]);
        let (mut p, pe) = (self.rowptr[i], self.rowptr[i + 1]);
        let (mut q, qe) = (self.rowptr[j], self.rowptr[j + 1]);
        let mut s = 0.0;
        while p < pe && q < qe {
            let (cp, cq) = (self.cols[p], self.cols[q]);
            if cp == cq {
                s += self.vals[p] * self.vals[q];
            }
            p += (cp <= cq) as usize;
            q += (cq <= cp) as usize;
        }
        s
    }
}

fn interior_indices(cloud: &PointCloud) -> Vec<usize> {
    (0..cloud.len())
        .filter(|&i| cloud.point(i).iter().all(|&x| (INTERIOR.0..=INTERIOR.1).contains(&x)))
        .collect()
}

/// Relative Frobenius error of `L L^T` against the kernel matrix, estimated
/// from `m` uniformly drawn index pairs and repeated `reps` times.
///
/// With `interior` set, both indices of every pair are drawn from the
/// points inside `[0.05, 0.95]^d`.
pub fn sampled_frobenius_error(
    factor: &SparseLowerFactor,
    cloud: &PointCloud,
    spec: &KernelSpec,
    m: usize,
    reps: usize,
    seed: u64,
    interior: bool,
) -> Result<ErrorReport> {
    spec.validate()?;
    if m == 0 || reps == 0 {
        return Err(Error::InvalidParameter("m and reps must be at least 1".into()));
    }
    if factor.n() != cloud.len() {
        return Err(Error::DimensionMismatch { expected: cloud.len(), found: factor.n() });
    }
    let pool: Vec<usize> = if interior { interior_indices(cloud) } else { (0..cloud.len()).collect() };
    if pool.is_empty() {
        return Err(Error::NoInteriorPoints);
    }
    let rows = RowView::new(factor)?;
    let mut rng = rng_from_seed(seed);
    let mut errors = Vec::with_capacity(reps);
    for _ in 0..reps {
        let (mut num, mut den) = (0.0, 0.0);
        for _ in 0..m {
            let a = pool[rng.gen_range(0..pool.len())];
            let b = pool[rng.gen_range(0..pool.len())];
            let mut theta = spec.eval_unchecked(cloud.dist(a, b));
            if a == b {
                theta += spec.nugget;
            }
            let diff = rows.llt(a, b) - theta;
            num += diff * diff;
            den += theta * theta;
        }
        errors.push((num / den).sqrt());
    }
    let mean = errors.iter().sum::<f64>() / reps as f64;
    let std = if reps > 1 {
        (errors.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (reps - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(ErrorReport { mean_e: mean, std_e: std, m, reps, interior, seed })
}

/// `|L L^T - Theta|_F / |Theta|_F` with `theta` dense in original order.
pub fn exact_frobenius_error(factor: &SparseLowerFactor, theta: &DenseMatrix) -> Result<f64> {
    let n = factor.n();
    if n > DEFAULT_ORACLE_CAP {
        return Err(Error::OracleCapExceeded { n, cap: DEFAULT_ORACLE_CAP });
    }
    if theta.n != n {
        return Err(Error::DimensionMismatch { expected: n, found: theta.n });
    }
    // L L^T in original order, accumulated column by column.
    let mut llt = DenseMatrix::zeros(n);
    let (cp, ri) = (factor.pattern.colptr(), factor.pattern.rowidx());
    let perm = &factor.perm;
    for j in 0..n {
        for p in cp[j]..cp[j + 1] {
            let (a, va) = (perm[ri[p]], factor.values[p]);
            for q in cp[j]..cp[j + 1] {
                llt.data[a * n + perm[ri[q]]] += va * factor.values[q];
            }
        }
    }
    let diff = DenseMatrix::from_fn(n, |i, j| llt.get(i, j) - theta.get(i, j));
    Ok(diff.frobenius() / theta.frobenius())
}

/// Homogeneity of a point cloud and the grid resolution it was measured at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homogeneity {
    pub delta: f64,
    pub grid_per_axis: usize,
}

/// Ratio of the smallest separation (to other points and the boundary) to
/// the largest empty-ball radius, with [`DEFAULT_GRID`] points per axis.
pub fn homogeneity_delta(cloud: &PointCloud) -> Result<Homogeneity> {
    homogeneity_delta_with_grid(cloud, DEFAULT_GRID)
}

/// Like [`homogeneity_delta`] with a chosen grid resolution.
///
/// The empty-ball radius is maximized over a regular grid with endpoints.
/// Under [`BoundaryPolicy::UnitBox`] the grid covers `[0,1]^d` and boundary
/// distances count; otherwise it covers the bounding box of the cloud and
/// grid points see no boundary.
pub fn homogeneity_delta_with_grid(cloud: &PointCloud, per_axis: usize) -> Result<Homogeneity> {
    let (n, d) = (cloud.len(), cloud.dim());
    if n < 2 {
        return Err(Error::InvalidParameter("homogeneity needs at least two points".into()));
    }
    if per_axis < 2 {
        return Err(Error::InvalidParameter("grid needs at least two points per axis".into()));
    }
    let mut sep = f64::INFINITY;
    for i in 0..n {
        sep = sep.min(cloud.boundary_dist(i));
        for j in 0..i {
            sep = sep.min(cloud.dist(i, j));
        }
    }

    let unit = matches!(cloud.boundary(), BoundaryPolicy::UnitBox);
    let (lo, hi): (Vec<f64>, Vec<f64>) = if unit {
        (vec![0.0; d], vec![1.0; d])
    } else {
        (0..d)
            .map(|a| {
                (0..n).map(|i| cloud.point(i)[a]).fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), x| (l.min(x), h.max(x)))
            })
            .unzip()
    };
    let total = per_axis.pow(d as u32);
    let mut x = vec![0.0; d];
    let mut radius: f64 = 0.0;
    for g in 0..total {
        let mut rest = g;
        for a in 0..d {
            let k = rest % per_axis;
            rest /= per_axis;
            x[a] = lo[a] + (hi[a] - lo[a]) * k as f64 / (per_axis - 1) as f64;
        }
        let mut near = if unit { x.iter().map(|&c| c.min(1.0 - c)).fold(f64::INFINITY, f64::min) } else { f64::INFINITY };
        for i in 0..n {
            near = near.min(crate::geometry::euclidean(&x, cloud.point(i)));
        }
        radius = radius.max(near);
    }
    Ok(Homogeneity { delta: sep / radius, grid_per_axis: per_axis })
}

/// Column names of a benchmark row.
pub const CSV_HEADER: [&str; 13] = [
    "N", "d", "kernel", "rho", "nnz", "rank", "t_order", "t_entries", "t_ichol", "E_mean", "E_std", "Ebar_mean", "Ebar_std",
];

/// One benchmark result in the table schema of [`CSV_HEADER`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub n: usize,
    pub d: usize,
    pub kernel: String,
    pub rho: f64,
    pub nnz: usize,
    pub rank: usize,
    pub timings: Timings,
    pub error: ErrorReport,
    /// Interior error, absent when no point is interior.
    pub interior: Option<ErrorReport>,
}

impl ReportRow {
    /// Field strings in header order. Floats use the shortest form that
    /// reads back exactly; a missing interior error prints as `NaN`.
    pub fn fields(&self) -> Vec<String> {
        let (eb, sb) = self.interior.map_or((f64::NAN, f64::NAN), |r| (r.mean_e, r.std_e));
        vec![
            self.n.to_string(),
            self.d.to_string(),
            self.kernel.clone(),
            self.rho.to_string(),
            self.nnz.to_string(),
            self.rank.to_string(),
            self.timings.order.to_string(),
            self.timings.entries.to_string(),
            self.timings.ichol.to_string(),
            self.error.mean_e.to_string(),
            self.error.std_e.to_string(),
            eb.to_string(),
            sb.to_string(),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{gen_grid, gen_uniform};
    use crate::ichol::{factor_kernel, FactorMode};
    use crate::kernels::dense_kernel_matrix;

    #[test]
    fn exact_factor_has_zero_error() {
        let cloud = gen_uniform(60, 2, 3).unwrap();
        let spec = KernelSpec::matern(1.5, 0.2).unwrap().with_nugget(1e-4).unwrap();
        let f = factor_kernel(&cloud, &spec, 1e6, FactorMode::Maximin).unwrap().factor;
        let r = sampled_frobenius_error(&f, &cloud, &spec, 2000, 3, 1, false).unwrap();
        assert!(r.mean_e <= 1e-12);
        let theta = dense_kernel_matrix(&cloud, &spec).unwrap();
        assert!(exact_frobenius_error(&f, &theta).unwrap() <= 1e-12);
    }

    #[test]
    fn identity_error_is_zero() {
        let cloud = gen_uniform(10, 2, 3).unwrap();
        let spec = KernelSpec::exponential(1e-9).unwrap();
        let f = factor_kernel(&cloud, &spec, 1.0, FactorMode::Maximin).unwrap().factor;
        assert_eq!(exact_frobenius_error(&f, &DenseMatrix::identity(10)).unwrap(), 0.0);
    }

    #[test]
    fn exhaustive_sampling_approaches_exact() {
        let n = 300;
        let cloud = gen_uniform(n, 2, 12).unwrap();
        let spec = KernelSpec::matern(0.5, 0.2).unwrap();
        let f = factor_kernel(&cloud, &spec, 2.0, FactorMode::Maximin).unwrap().factor;
        let exact = exact_frobenius_error(&f, &dense_kernel_matrix(&cloud, &spec).unwrap()).unwrap();
        let r = sampled_frobenius_error(&f, &cloud, &spec, n * n, 10, 4, false).unwrap();
        assert!((r.mean_e - exact).abs() <= 3.0 * r.std_e.max(1e-3 * exact), "{} {} {}", r.mean_e, r.std_e, exact);
    }

    #[test]
    fn error_decreases_with_rho_and_is_deterministic() {
        let cloud = gen_uniform(1000, 2, 8).unwrap();
        let spec = KernelSpec::matern(0.5, 0.2).unwrap();
        let theta = dense_kernel_matrix(&cloud, &spec).unwrap();
        let mut last = f64::INFINITY;
        for rho in [2.0, 3.0, 4.0] {
            let f = factor_kernel(&cloud, &spec, rho, FactorMode::Maximin).unwrap().factor;
            let e = exact_frobenius_error(&f, &theta).unwrap();
            assert!(e <= last, "rho={rho}");
            last = e;
            let a = sampled_frobenius_error(&f, &cloud, &spec, 5000, 4, 9, true).unwrap();
            let b = sampled_frobenius_error(&f, &cloud, &spec, 5000, 4, 9, true).unwrap();
            assert_eq!(a, b);
            assert!(a.mean_e >= 0.0 && a.std_e >= 0.0);
        }
    }

    #[test]
    fn interior_requires_points() {
        let cloud = PointCloud::new(vec![0.0, 0.0, 1.0, 1.0], 2, BoundaryPolicy::None).unwrap();
        let spec = KernelSpec::matern(0.5, 0.2).unwrap();
        let f = factor_kernel(&cloud, &spec, 2.0, FactorMode::Maximin).unwrap().factor;
        assert!(matches!(
            sampled_frobenius_error(&f, &cloud, &spec, 10, 1, 0, true),
            Err(Error::NoInteriorPoints)
        ));
        assert!(sampled_frobenius_error(&f, &cloud, &spec, 0, 1, 0, false).is_err());
    }

    #[test]
    fn grid_delta_matches_lattice() {
        // Cell-centred 7x7 lattice: separation 1/14 (to the boundary), and
        // the largest hole is at a lattice corner, (1/7)/sqrt(2) away.
        let h = homogeneity_delta(&gen_grid(7, 2).unwrap()).unwrap();
        assert_eq!(h.grid_per_axis, 64);
        assert!((h.delta - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12, "{}", h.delta);
    }

    #[test]
    fn two_point_delta() {
        // Points (0,0) and (1,0.5) on a 3x3 grid over their bounding box:
        // the box centre is the emptiest grid point, at half the separation.
        let cloud = PointCloud::new(vec![0.0, 0.0, 1.0, 0.5], 2, BoundaryPolicy::None).unwrap();
        let h = homogeneity_delta_with_grid(&cloud, 3).unwrap();
        assert!((h.delta - 2.0).abs() < 1e-12, "{}", h.delta);
    }

    #[test]
    fn delta_in_unit_interval_for_generators() {
        for seed in 0..3 {
            let c = gen_uniform(200, 2, seed).unwrap().with_boundary(BoundaryPolicy::UnitBox).unwrap();
            let d = homogeneity_delta(&c).unwrap().delta;
            assert!(d > 0.0 && d <= 1.0);
        }
    }

    #[test]
    fn row_fields_follow_header() {
        let row = ReportRow {
            n: 10,
            d: 2,
            kernel: "matern:nu=1.5,l=0.2".into(),
            rho: 3.0,
            nnz: 40,
            rank: 10,
            timings: Timings { order: 0.5, entries: 0.25, ichol: 0.125 },
            error: ErrorReport { mean_e: 1e-3, std_e: 2e-4, m: 100, reps: 2, interior: false, seed: 0 },
            interior: None,
        };
        let f = row.fields();
        assert_eq!(f.len(), CSV_HEADER.len());
        assert_eq!(f[3], "3");
        assert_eq!(f[9], "0.001");
        assert_eq!(f[11], "NaN");
    }
}
