//! Zero fill-in incomplete Cholesky factorization.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::kernels::{assemble, DenseMatrix, KernelSpec, SparseSymmetric};
use crate::ordering::{maximin_fast, min_rule_pattern, reversed_perm, MaximinOrdering, MaximinResult, SparsityPattern};
use crate::supernodal::{build_with_candidates, SupernodalPlan, DEFAULT_H};

/// Default size limit for [`dense_cholesky`].
pub const DENSE_CHOLESKY_CAP: usize = 4000;

/// Lower-triangular factor stored on a sparsity pattern.
///
/// Row and column `k` refer to original point `perm[k]`. Columns whose
/// pivot was not positive are stored as zeros and listed in
/// `zeroed_columns`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseLowerFactor {
    pub pattern: SparsityPattern,
    pub values: Vec<f64>,
    pub perm: Vec<usize>,
    pub rank: usize,
    pub zeroed_columns: Vec<usize>,
}

impl SparseLowerFactor {
    pub fn n(&self) -> usize {
        self.pattern.n()
    }

    pub fn nnz(&self) -> usize {
        self.pattern.nnz()
    }

    pub fn is_full_rank(&self) -> bool {
        self.zeroed_columns.is_empty()
    }

    /// Entry `L[i, j]` at order positions.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pattern.find(i, j).map_or(0.0, |p| self.values[p])
    }

    /// Diagonal entry of column `j`.
    pub fn diag(&self, j: usize) -> f64 {
        self.values[self.pattern.colptr()[j]]
    }

    /// Dense copy in order positions.
    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.n());
        for (p, (i, j)) in self.pattern.entries().enumerate() {
            out.set(i, j, self.values[p]);
        }
        out
    }

    /// `y = L x` in order positions.
    pub fn lower_mul(&self, x: &[f64]) -> Vec<f64> {
        let (cp, ri) = (self.pattern.colptr(), self.pattern.rowidx());
        let mut y = vec![0.0; self.n()];
        for j in 0..self.n() {
            let xj = x[j];
            if xj == 0.0 {
                continue;
            }
            for p in cp[j]..cp[j + 1] {
                y[ri[p]] += self.values[p] * xj;
            }
        }
        y
    }

    /// `y = L^T x` in order positions.
    pub fn upper_mul(&self, x: &[f64]) -> Vec<f64> {
        let (cp, ri) = (self.pattern.colptr(), self.pattern.rowidx());
        (0..self.n())
            .map(|j| (cp[j]..cp[j + 1]).map(|p| self.values[p] * x[ri[p]]).sum())
            .collect()
    }

    /// Solves `L y = b` in place. Requires full rank.
    pub fn forward_solve(&self, b: &mut [f64]) -> Result<()> {
        self.require_full_rank()?;
        let (cp, ri) = (self.pattern.colptr(), self.pattern.rowidx());
        for j in 0..self.n() {
            let s = cp[j];
            let yj = b[j] / self.values[s];
            b[j] = yj;
            for p in s + 1..cp[j + 1] {
                b[ri[p]] -= self.values[p] * yj;
            }
        }
        Ok(())
    }

    /// Solves `L^T y = b` in place. Requires full rank.
    pub fn backward_solve(&self, b: &mut [f64]) -> Result<()> {
        self.require_full_rank()?;
        let (cp, ri) = (self.pattern.colptr(), self.pattern.rowidx());
        for j in (0..self.n()).rev() {
            let s = cp[j];
            let mut acc = b[j];
            for p in s + 1..cp[j + 1] {
                acc -= self.values[p] * b[ri[p]];
            }
            b[j] = acc / self.values[s];
        }
        Ok(())
    }

    fn require_full_rank(&self) -> Result<()> {
        if self.zeroed_columns.is_empty() {
            Ok(())
        } else {
            Err(Error::RankDeficient { zeroed: self.zeroed_columns.len() })
        }
    }
}

/// Incomplete Cholesky on the pattern of `a`; failed pivots zero their
/// column and the factorization carries on.
pub fn ichol0(a: &SparseSymmetric) -> Result<SparseLowerFactor> {
    factorize(a, false)
}

/// Like [`ichol0`] but stops at the first nonpositive pivot.
pub fn ichol0_strict(a: &SparseSymmetric) -> Result<SparseLowerFactor> {
    factorize(a, true)
}

fn factorize(a: &SparseSymmetric, strict: bool) -> Result<SparseLowerFactor> {
    let pattern = &a.pattern;
    let n = pattern.n();
    let (cp, ri) = (pattern.colptr(), pattern.rowidx());
    for j in 0..n {
        if cp[j] == cp[j + 1] || ri[cp[j]] != j {
            return Err(Error::MissingDiagonal(j));
        }
    }
    let mut v = a.values.clone();
    let mut zeroed = Vec::new();
    // mark[k]: storage offset of row k in the current pivot column.
    let mut mark = vec![usize::MAX; n];

    for i in 0..n {
        let (s, e) = (cp[i], cp[i + 1]);
        let pivot = v[s];
        if !(pivot > 0.0) {
            if strict {
                return Err(Error::NonPositivePivot { column: i, value: pivot });
            }
            v[s..e].fill(0.0);
            zeroed.push(i);
            continue;
        }
        let root = pivot.sqrt();
        for x in &mut v[s..e] {
            *x /= root;
        }
        for p in s + 1..e {
            mark[ri[p]] = p;
        }
        for a_off in s + 1..e {
            let j = ri[a_off];
            let lji = v[a_off];
            if lji == 0.0 {
                continue;
            }
            let (sj, ej) = (cp[j], cp[j + 1]);
            let tail = e - a_off;
            let col_len = ej - sj;
            let log = usize::BITS - col_len.leading_zeros();
            if col_len <= tail * log as usize {
                // Walk column j and pick the rows also present in column i.
                for q in sj..ej {
                    let m = mark[ri[q]];
                    if m != usize::MAX {
                        v[q] -= v[m] * lji;
                    }
                }
            } else {
                // Look up each remaining row of column i in column j.
                let rows_j = &ri[sj..ej];
                for b in a_off..e {
                    if let Ok(off) = rows_j.binary_search(&ri[b]) {
                        v[sj + off] -= v[b] * lji;
                    }
                }
            }
        }
        for p in s + 1..e {
            mark[ri[p]] = usize::MAX;
        }
    }
    Ok(SparseLowerFactor {
        pattern: pattern.clone(),
        values: v,
        perm: a.perm.clone(),
        rank: n - zeroed.len(),
        zeroed_columns: zeroed,
    })
}

/// Dense Cholesky factor of a symmetric positive definite matrix, up to
/// [`DENSE_CHOLESKY_CAP`] rows.
pub fn dense_cholesky(a: &DenseMatrix) -> Result<DenseMatrix> {
    dense_cholesky_with_cap(a, DENSE_CHOLESKY_CAP)
}

pub fn dense_cholesky_with_cap(a: &DenseMatrix, cap: usize) -> Result<DenseMatrix> {
    let n = a.n;
    if n > cap {
        return Err(Error::OracleCapExceeded { n, cap });
    }
    // Right-looking outer-product updates on the upper triangle; row i holds
    // column i of L once its pivot is processed.
    let mut u = a.data.clone();
    for i in 0..n {
        let pivot = u[i * n + i];
        if !(pivot > 0.0) {
            return Err(Error::NonPositivePivot { column: i, value: pivot });
        }
        let root = pivot.sqrt();
        for x in &mut u[i * n + i..(i + 1) * n] {
            *x /= root;
        }
        let (done, rest) = u.split_at_mut((i + 1) * n);
        let li = &done[i * n..];
        for j in i + 1..n {
            let lji = li[j];
            if lji == 0.0 {
                continue;
            }
            let row = &mut rest[(j - i - 1) * n..(j - i) * n];
            for k in j..n {
                row[k] -= li[k] * lji;
            }
        }
    }
    Ok(DenseMatrix::from_fn(n, |r, c| if c <= r { u[c * n + r] } else { 0.0 }))
}

/// Which ordering a kernel factorization uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FactorMode {
    #[default]
    Maximin,
    Supernodal,
}

/// Wall-clock seconds spent in each stage.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Timings {
    pub order: f64,
    pub entries: f64,
    pub ichol: f64,
}

/// Everything produced by [`factor_kernel`].
#[derive(Debug, Clone)]
pub struct KernelFactorization {
    pub maximin: MaximinResult,
    pub plan: Option<SupernodalPlan>,
    pub factor: SparseLowerFactor,
    pub timings: Timings,
}

/// Orders `cloud`, assembles the kernel matrix on the sparsity pattern and
/// factors it. Supernodal mode uses [`DEFAULT_H`] for the level ratio.
pub fn factor_kernel(cloud: &PointCloud, spec: &KernelSpec, rho: f64, mode: FactorMode) -> Result<KernelFactorization> {
    factor_kernel_with_h(cloud, spec, rho, mode, DEFAULT_H)
}

pub fn factor_kernel_with_h(cloud: &PointCloud, spec: &KernelSpec, rho: f64, mode: FactorMode, h: f64) -> Result<KernelFactorization> {
    spec.validate()?;
    let t0 = Instant::now();
    let maximin = maximin_fast(cloud, rho)?;
    let plan = match mode {
        FactorMode::Maximin => None,
        FactorMode::Supernodal => Some(build_with_candidates(&maximin.ordering, &maximin.pattern, cloud, rho, h)?),
    };
    let t_order = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let (pattern, perm) = match &plan {
        None => (&maximin.pattern, maximin.ordering.perm()),
        Some(p) => (&p.pattern, p.order.as_slice()),
    };
    let matrix = assemble(cloud, spec, pattern, perm)?;
    let t_entries = t1.elapsed().as_secs_f64();

    let t2 = Instant::now();
    let factor = ichol0(&matrix)?;
    let t_ichol = t2.elapsed().as_secs_f64();

    Ok(KernelFactorization {
        maximin,
        plan,
        factor,
        timings: Timings { order: t_order, entries: t_entries, ichol: t_ichol },
    })
}

/// Factors a sparse matrix (for instance a discretized elliptic operator)
/// in the reverse of a maximin ordering, on the min-rule pattern.
///
/// `a` must be stored in the positions of `ordering` (`a.perm` equal to
/// `ordering.perm()`); its entries outside the pattern are dropped. The
/// returned factor approximates the Cholesky factor of the reordered matrix
/// and its `perm` is the reversed ordering.
pub fn factor_precision(a: &SparseSymmetric, ordering: &MaximinOrdering, cloud: &PointCloud, rho: f64) -> Result<SparseLowerFactor> {
    if a.n() != cloud.len() {
        return Err(Error::DimensionMismatch { expected: cloud.len(), found: a.n() });
    }
    if a.perm != ordering.perm() {
        return Err(Error::Inconsistent("matrix is not stored in the given maximin ordering".into()));
    }
    let n = a.n();
    let pattern = min_rule_pattern(ordering, cloud, rho)?;
    let rev = reversed_perm(ordering);
    // Reversed position r is maximin position n - 1 - r.
    let values = pattern.entries().map(|(r, c)| a.get(n - 1 - r, n - 1 - c)).collect();
    ichol0(&SparseSymmetric::new(pattern, values, rev)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{gen_line, gen_uniform};
    use crate::kernels::dense_kernel_matrix;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn dense_to_sparse(a: &DenseMatrix) -> SparseSymmetric {
        let n = a.n;
        SparseSymmetric::from_fn(SparsityPattern::full(n), (0..n).collect(), |i, j| a.get(i, j)).unwrap()
    }

    fn spd(n: usize, seed: u64) -> DenseMatrix {
        use rand::Rng;
        let mut rng = crate::geometry::rng_from_seed(seed);
        let b = DenseMatrix::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        DenseMatrix::from_fn(n, |i, j| {
            (0..n).map(|k| b.get(k, i) * b.get(k, j)).sum::<f64>() + if i == j { 1.0 } else { 0.0 }
        })
    }

    #[test]
    fn small_hand_factors() {
        let a = DenseMatrix::from_fn(2, |i, j| [[4.0, 2.0], [2.0, 5.0]][i][j]);
        let l = ichol0(&dense_to_sparse(&a)).unwrap().to_dense();
        assert_eq!(l.data, vec![2.0, 0.0, 1.0, 2.0]);
        assert_eq!(dense_cholesky(&DenseMatrix::identity(1)).unwrap().data, vec![1.0]);
        let d = DenseMatrix::from_fn(2, |i, j| if i == j { [4.0, 9.0][i] } else { 0.0 });
        assert_eq!(dense_cholesky(&d).unwrap().data, vec![2.0, 0.0, 0.0, 3.0]);
    }

    #[test]
    fn identity_any_pattern() {
        let pattern = SparsityPattern::from_columns(vec![vec![0, 2, 3], vec![1, 3], vec![2], vec![3]]).unwrap();
        let a = SparseSymmetric::from_fn(pattern, vec![0, 1, 2, 3], |i, j| if i == j { 1.0 } else { 0.0 }).unwrap();
        let f = ichol0(&a).unwrap();
        assert_eq!(f.rank, 4);
        assert_eq!(f.to_dense(), DenseMatrix::identity(4));
    }

    #[test]
    fn dense_reconstruction() {
        let a = spd(50, 3);
        let l = dense_cholesky(&a).unwrap();
        let lt = DenseMatrix::from_fn(50, |i, j| (0..50).map(|k| l.get(i, k) * l.get(j, k)).sum());
        let diff = DenseMatrix::from_fn(50, |i, j| lt.get(i, j) - a.get(i, j));
        assert!(diff.frobenius() / a.frobenius() <= 1e-13);
        let bad = DenseMatrix::from_fn(2, |i, j| if i == j { -1.0 } else { 0.0 });
        assert!(matches!(dense_cholesky(&bad), Err(Error::NonPositivePivot { column: 0, .. })));
        assert!(matches!(dense_cholesky_with_cap(&a, 10), Err(Error::OracleCapExceeded { .. })));
    }

    #[test]
    fn full_pattern_matches_dense() {
        let cloud = gen_uniform(100, 2, 11).unwrap();
        let spec = KernelSpec::matern(1.5, 0.2).unwrap().with_nugget(1e-6).unwrap();
        let theta = dense_kernel_matrix(&cloud, &spec).unwrap();
        let want = dense_cholesky(&theta).unwrap();
        let got = ichol0(&dense_to_sparse(&theta)).unwrap().to_dense();
        for i in 0..100 {
            for j in 0..=i {
                let w = want.get(i, j);
                assert!((got.get(i, j) - w).abs() <= 1e-12 * w.abs().max(want.get(j, j)), "({i},{j})");
            }
        }
    }

    #[test]
    fn pattern_exactness() {
        let cloud = gen_uniform(400, 2, 2).unwrap();
        let spec = KernelSpec::matern(0.5, 0.2).unwrap();
        let out = factor_kernel(&cloud, &spec, 2.5, FactorMode::Maximin).unwrap();
        let f = &out.factor;
        assert!(f.is_full_rank());
        let a = assemble(&cloud, &spec, &f.pattern, &f.perm).unwrap();
        let (cp, ri) = (f.pattern.colptr(), f.pattern.rowidx());
        for j in 0..f.n() {
            for p in cp[j]..cp[j + 1] {
                let i = ri[p];
                // (L L^T)_{ij} = sum_k L_ik L_jk over k <= j.
                let mut s = 0.0;
                for k in 0..=j {
                    s += f.get(i, k) * f.get(j, k);
                }
                assert!((s - a.values[p]).abs() <= 1e-12 * a.values[cp[j]].max(a.values[cp[i]]), "({i},{j})");
            }
        }
    }

    #[test]
    fn zeroed_column_recorded() {
        let pattern = SparsityPattern::full(3);
        let vals = [[1.0, 2.0, 0.0], [2.0, 1.0, 0.5], [0.0, 0.5, 2.0]];
        let a = SparseSymmetric::from_fn(pattern, vec![0, 1, 2], |i, j| vals[i][j]).unwrap();
        let f = ichol0(&a).unwrap();
        assert_eq!(f.zeroed_columns, vec![1]);
        assert_eq!(f.rank, 2);
        assert_eq!(f.get(2, 1), 0.0);
        assert!(f.diag(2) > 0.0);
        assert!(matches!(ichol0_strict(&a), Err(Error::NonPositivePivot { column: 1, .. })));
        assert!(matches!(f.forward_solve(&mut [0.0; 3]), Err(Error::RankDeficient { zeroed: 1 })));
    }

    #[test]
    fn missing_diagonal_rejected() {
        // Patterns without a diagonal cannot be built, so ichol0 never sees one.
        let err = SparsityPattern::from_csc(2, vec![0, 2, 2], vec![0, 1]).unwrap_err();
        assert!(matches!(err, Error::MissingDiagonal(1)));
    }

    #[test]
    fn schur_complement_identity() {
        // Leading m columns of the dense factor reproduce Theta_21 Theta_11^-1
        // and the trailing block factors the Schur complement.
        let n = 60;
        let m = 25;
        let cloud = gen_uniform(n, 2, 8).unwrap();
        let spec = KernelSpec::matern(1.5, 0.3).unwrap().with_nugget(1e-4).unwrap();
        let theta = dense_kernel_matrix(&cloud, &spec).unwrap();
        let l = ichol0(&dense_to_sparse(&theta)).unwrap().to_dense();
        let t = DMatrix::from_fn(n, n, |i, j| theta.get(i, j));
        let t11 = t.view((0, 0), (m, m)).into_owned();
        let t21 = t.view((m, 0), (n - m, m)).into_owned();
        let t22 = t.view((m, m), (n - m, n - m)).into_owned();
        let t11_inv = t11.clone().try_inverse().unwrap();
        let l11 = DMatrix::from_fn(m, m, |i, j| l.get(i, j));
        let l21 = DMatrix::from_fn(n - m, m, |i, j| l.get(m + i, j));
        let l22 = DMatrix::from_fn(n - m, n - m, |i, j| l.get(m + i, m + j));
        // L21 L11^-1 = Theta21 Theta11^-1.
        let lhs = &l21 * l11.try_inverse().unwrap();
        let rhs = &t21 * &t11_inv;
        assert!((&lhs - &rhs).norm() <= 1e-8 * rhs.norm());
        let schur = &t22 - &t21 * &t11_inv * t21.transpose();
        assert!((&l22 * l22.transpose() - &schur).norm() <= 1e-8 * schur.norm());
    }

    #[test]
    fn precision_identity_and_laplacian() {
        let n = 200;
        let cloud = gen_line(n).unwrap();
        let ord = maximin_fast(&cloud, 2.0).unwrap().ordering;
        let rank = ord.rank().to_vec();
        // Tridiagonal Laplacian plus identity in original indices.
        let lap = |i: usize, j: usize| -> f64 {
            if i == j {
                3.0
            } else if i.abs_diff(j) == 1 {
                -1.0
            } else {
                0.0
            }
        };
        let mut cols = vec![Vec::new(); n];
        for i in 0..n {
            for j in [i.wrapping_sub(1), i, i + 1] {
                if j < n {
                    let (a, b) = (rank[i], rank[j]);
                    if a >= b {
                        cols[b].push(a);
                    }
                }
            }
        }
        let pattern = SparsityPattern::from_columns(cols).unwrap();
        let a = SparseSymmetric::from_fn(pattern.clone(), ord.perm().to_vec(), lap).unwrap();
        let id = SparseSymmetric::from_fn(pattern, ord.perm().to_vec(), |i, j| if i == j { 1.0 } else { 0.0 }).unwrap();
        assert_eq!(factor_precision(&id, &ord, &cloud, 2.0).unwrap().to_dense(), DenseMatrix::identity(n));

        let errors: Vec<f64> = [100.0, 2.0, 1.5, 1.0]
            .iter()
            .map(|&rho| {
                let f = factor_precision(&a, &ord, &cloud, rho).unwrap();
                assert_eq!(f.perm, reversed_perm(&ord));
                let l = f.to_dense();
                let diff = DenseMatrix::from_fn(n, |i, j| {
                    let llt: f64 = (0..=i.min(j)).map(|k| l.get(i, k) * l.get(j, k)).sum();
                    llt - lap(f.perm[i], f.perm[j])
                });
                let norm = DenseMatrix::from_fn(n, &lap).frobenius();
                diff.frobenius() / norm
            })
            .collect();
        assert!(errors[0] <= 1e-10, "{errors:?}");
        assert!(errors.windows(2).all(|w| w[0] <= w[1]), "{errors:?}");
        assert!(errors[1] < errors[3], "{errors:?}");
    }

    #[test]
    fn precision_rejects_mismatched_order() {
        let cloud = gen_line(5).unwrap();
        let ord = maximin_fast(&cloud, 2.0).unwrap().ordering;
        let a = SparseSymmetric::from_fn(SparsityPattern::diagonal(5), (0..5).collect(), |_, _| 1.0).unwrap();
        assert!(matches!(factor_precision(&a, &ord, &cloud, 2.0), Err(Error::Inconsistent(_))));
    }

    #[test]
    fn large_rho_reconstructs() {
        let cloud = gen_uniform(40, 2, 4).unwrap();
        let spec = KernelSpec::matern(0.5, 0.3).unwrap();
        for mode in [FactorMode::Maximin, FactorMode::Supernodal] {
            let out = factor_kernel(&cloud, &spec, 1e6, mode).unwrap();
            assert_eq!(out.factor.nnz(), 40 * 41 / 2);
            let l = out.factor.to_dense();
            let p = &out.factor.perm;
            let mut worst: f64 = 0.0;
            for i in 0..40 {
                for j in 0..=i {
                    let s: f64 = (0..=j).map(|k| l.get(i, k) * l.get(j, k)).sum();
                    worst = worst.max((s - spec.eval(cloud.dist(p[i], p[j])).unwrap()).abs());
                }
            }
            assert!(worst <= 1e-12, "{mode:?} {worst}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn deterministic_and_nonnegative_diagonal(seed in 0u64..1000, rho in 1.0f64..4.0) {
            let cloud = gen_uniform(150, 2, seed).unwrap();
            let spec = KernelSpec::matern(1.5, 0.25).unwrap();
            let a = factor_kernel(&cloud, &spec, rho, FactorMode::Maximin).unwrap().factor;
            let b = factor_kernel(&cloud, &spec, rho, FactorMode::Maximin).unwrap().factor;
            prop_assert_eq!(&a, &b);
            prop_assert_eq!(a.rank + a.zeroed_columns.len(), a.n());
            for j in 0..a.n() {
                prop_assert!(a.diag(j) >= 0.0);
            }
            for &j in &a.zeroed_columns {
                let cp = a.pattern.colptr();
                prop_assert!(a.values[cp[j]..cp[j + 1]].iter().all(|&v| v == 0.0));
            }
        }
    }
}
