//! Matrix-vector products, solves, log-determinants, sampling, conjugate
//! gradients and low-rank approximation from a sparse factor.
//!
//! Every vector passed in or returned is indexed by original point index;
//! the factor's permutation is applied internally.

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::geometry::rng_from_seed;
use crate::ichol::SparseLowerFactor;
use crate::kernels::{DenseMatrix, SparseSymmetric};

/// Seed of the start vector used by the power iteration in [`pca_approx`].
pub const POWER_SEED: u64 = 0x5eed;
/// Power iterations used to estimate residual norms.
pub const POWER_ITERATIONS: usize = 100;

/// A symmetric linear map on `R^n`.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Vec<f64>;
}

impl LinearOperator for DenseMatrix {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.matvec(x)
    }
}

/// Applies a sparse symmetric matrix in original index order.
impl LinearOperator for SparseSymmetric {
    fn dim(&self) -> usize {
        self.n()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n();
        let (cp, ri) = (self.pattern.colptr(), self.pattern.rowidx());
        let xp: Vec<f64> = self.perm.iter().map(|&o| x[o]).collect();
        let mut yp = vec![0.0; n];
        for j in 0..n {
            for p in cp[j]..cp[j + 1] {
                let i = ri[p];
                let v = self.values[p];
                yp[i] += v * xp[j];
                if i != j {
                    yp[j] += v * xp[i];
                }
            }
        }
        scatter(&self.perm, &yp)
    }
}

/// The identity on `R^n`.
#[derive(Debug, Clone, Copy)]
pub struct Identity(pub usize);

impl LinearOperator for Identity {
    fn dim(&self) -> usize {
        self.0
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }
}

/// What `L L^T` stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Meaning {
    /// `L L^T` approximates a covariance matrix in a maximin-type order.
    Covariance,
    /// `L L^T` approximates a sparse matrix in the reversed order.
    Precision,
}

/// `L L^T` viewed as an operator in original index order.
#[derive(Debug, Clone)]
pub struct FactorOperator {
    factor: SparseLowerFactor,
    meaning: Meaning,
}

fn gather(perm: &[usize], v: &[f64]) -> Vec<f64> {
    perm.iter().map(|&o| v[o]).collect()
}

fn scatter(perm: &[usize], v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    for (k, &o) in perm.iter().enumerate() {
        out[o] = v[k];
    }
    out
}

impl FactorOperator {
    pub fn new(factor: SparseLowerFactor, meaning: Meaning) -> Self {
        FactorOperator { factor, meaning }
    }

    pub fn covariance(factor: SparseLowerFactor) -> Self {
        Self::new(factor, Meaning::Covariance)
    }

    pub fn precision(factor: SparseLowerFactor) -> Self {
        Self::new(factor, Meaning::Precision)
    }

    pub fn factor(&self) -> &SparseLowerFactor {
        &self.factor
    }

    pub fn meaning(&self) -> Meaning {
        self.meaning
    }

    pub fn n(&self) -> usize {
        self.factor.n()
    }

    fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), found: v.len() });
        }
        Ok(())
    }

    /// `L L^T v`.
    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_len(v)?;
        let perm = &self.factor.perm;
        let w = self.factor.upper_mul(&gather(perm, v));
        Ok(scatter(perm, &self.factor.lower_mul(&w)))
    }

    /// `(L L^T)^{-1} b`. Fails on rank-deficient factors.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.check_len(b)?;
        let perm = &self.factor.perm;
        let mut y = gather(perm, b);
        self.factor.forward_solve(&mut y)?;
        self.factor.backward_solve(&mut y)?;
        Ok(scatter(perm, &y))
    }

    /// `log det(L L^T)`. Fails on rank-deficient factors.
    pub fn logdet(&self) -> Result<f64> {
        if !self.factor.is_full_rank() {
            return Err(Error::RankDeficient { zeroed: self.factor.zeroed_columns.len() });
        }
        Ok(2.0 * (0..self.n()).map(|j| self.factor.diag(j).ln()).sum::<f64>())
    }

    /// `L z`: a draw from `N(0, L L^T)` when `z` is standard normal, with
    /// `z` read in order positions and the result in original order.
    pub fn sample(&self, z: &[f64]) -> Result<Vec<f64>> {
        if self.meaning != Meaning::Covariance {
            return Err(Error::InvalidParameter("sampling needs a covariance factor".into()));
        }
        self.check_len(z)?;
        Ok(scatter(&self.factor.perm, &self.factor.lower_mul(z)))
    }
}

impl LinearOperator for FactorOperator {
    fn dim(&self) -> usize {
        self.n()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.matvec(x).expect("dimension checked by caller")
    }
}

/// Outcome of [`pcg_solve`].
#[derive(Debug, Clone)]
pub struct PcgResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Relative residual `|r| / |b|` before the first and after each
    /// iteration.
    pub residuals: Vec<f64>,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Preconditioned conjugate gradients for `A x = b`, starting from zero.
///
/// With `precond = None` this is plain CG. Stops once the relative residual
/// drops to `tol` or after `maxit` iterations; running out of iterations is
/// reported through `converged`, not as an error.
pub fn pcg_solve(
    a: &dyn LinearOperator,
    precond: Option<&FactorOperator>,
    b: &[f64],
    tol: f64,
    maxit: usize,
) -> Result<PcgResult> {
    let n = a.dim();
    if b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: b.len() });
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tol must be positive, got {tol}")));
    }
    if let Some(m) = precond {
        if m.n() != n {
            return Err(Error::DimensionMismatch { expected: n, found: m.n() });
        }
        if !m.factor().is_full_rank() {
            return Err(Error::RankDeficient { zeroed: m.factor().zeroed_columns.len() });
        }
    }
    let apply_m = |r: &[f64]| -> Result<Vec<f64>> {
        match precond {
            Some(m) => m.solve(r),
            None => Ok(r.to_vec()),
        }
    };

    let bnorm = dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(PcgResult { x, iterations: 0, residuals: vec![0.0], converged: true });
    }
    let mut r = b.to_vec();
    let mut z = apply_m(&r)?;
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut residuals = vec![1.0];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < maxit {
        let ap = a.apply(&p);
        let alpha = rz / dot(&p, &ap);
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        iterations += 1;
        let rel = dot(&r, &r).sqrt() / bnorm;
        residuals.push(rel);
        if rel <= tol {
            converged = true;
            break;
        }
        z = apply_m(&r)?;
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    Ok(PcgResult { x, iterations, residuals, converged })
}

/// Leading `k` columns of a factor together with an estimate of the
/// spectral norm of what they leave out.
#[derive(Debug, Clone)]
pub struct PcaApprox {
    pub k: usize,
    /// Columns `0..k` in compressed form; rows are order positions.
    pub colptr: Vec<usize>,
    pub rowidx: Vec<usize>,
    pub values: Vec<f64>,
    pub perm: Vec<usize>,
    /// Power-iteration estimate of `|Theta - L_k L_k^T|_2`.
    pub residual_norm: f64,
}

impl PcaApprox {
    /// `L_k L_k^T v` in original index order.
    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        let xp = gather(&self.perm, v);
        let mut coef = vec![0.0; self.k];
        for (j, c) in coef.iter_mut().enumerate() {
            *c = (self.colptr[j]..self.colptr[j + 1]).map(|p| self.values[p] * xp[self.rowidx[p]]).sum();
        }
        let mut y = vec![0.0; xp.len()];
        for (j, c) in coef.iter().enumerate() {
            for p in self.colptr[j]..self.colptr[j + 1] {
                y[self.rowidx[p]] += self.values[p] * c;
            }
        }
        scatter(&self.perm, &y)
    }
}

fn truncate(factor: &SparseLowerFactor, k: usize) -> Result<PcaApprox> {
    let n = factor.n();
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!("k must lie in 1..={n}, got {k}")));
    }
    let cp = factor.pattern.colptr();
    let end = cp[k];
    Ok(PcaApprox {
        k,
        colptr: cp[..=k].to_vec(),
        rowidx: factor.pattern.rowidx()[..end].to_vec(),
        values: factor.values[..end].to_vec(),
        perm: factor.perm.clone(),
        residual_norm: 0.0,
    })
}

/// Largest absolute eigenvalue of a symmetric operator, by power iteration
/// from a fixed random start.
pub fn power_norm(op: &dyn Fn(&[f64]) -> Vec<f64>, n: usize, iterations: usize, seed: u64) -> f64 {
    let mut rng = rng_from_seed(seed);
    let mut x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut norm = dot(&x, &x).sqrt();
    let mut estimate = 0.0;
    for _ in 0..iterations {
        if norm == 0.0 {
            return 0.0;
        }
        for v in &mut x {
            *v /= norm;
        }
        let y = op(&x);
        norm = dot(&y, &y).sqrt();
        estimate = norm;
        x = y;
    }
    estimate
}

/// Rank-`k` approximation from the first `k` columns of the factor, with the
/// factor itself standing in for the full matrix: the residual is spanned
/// by the remaining columns.
pub fn pca_approx(factor: &SparseLowerFactor, k: usize) -> Result<PcaApprox> {
    let mut out = truncate(factor, k)?;
    let n = factor.n();
    let cp = factor.pattern.colptr();
    let ri = factor.pattern.rowidx();
    let tail = |x: &[f64]| -> Vec<f64> {
        // x is in order positions here; R = L2 L2^T with L2 = columns k..n.
        let mut y = vec![0.0; n];
        for j in k..n {
            let c: f64 = (cp[j]..cp[j + 1]).map(|p| factor.values[p] * x[ri[p]]).sum();
            if c != 0.0 {
                for p in cp[j]..cp[j + 1] {
                    y[ri[p]] += factor.values[p] * c;
                }
            }
        }
        y
    };
    out.residual_norm = if k == n { 0.0 } else { power_norm(&tail, n, POWER_ITERATIONS, POWER_SEED) };
    Ok(out)
}

/// Rank-`k` approximation with the residual measured against an explicit
/// operator `theta` (original index order).
pub fn pca_approx_against(factor: &SparseLowerFactor, k: usize, theta: &dyn LinearOperator) -> Result<PcaApprox> {
    let mut out = truncate(factor, k)?;
    let n = factor.n();
    if theta.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, found: theta.dim() });
    }
    let residual = |x: &[f64]| -> Vec<f64> {
        let mut y = theta.apply(x);
        for (a, b) in y.iter_mut().zip(out.matvec(x)) {
            *a -= b;
        }
        y
    };
    out.residual_norm = power_norm(&residual, n, POWER_ITERATIONS, POWER_SEED);
    Ok(out)
}
