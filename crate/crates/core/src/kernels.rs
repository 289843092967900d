//! Covariance functions and assembly of kernel matrices on a sparsity
//! pattern.

use std::fmt;
use std::str::FromStr;

use statrs::function::gamma::ln_gamma;

use crate::bessel::bessel_k;
use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::ordering::SparsityPattern;

/// Parametric isotropic covariance family, normalized to 1 at zero lag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelFamily {
    /// Matérn with smoothness `nu` and length scale `ell`.
    Matern { nu: f64, ell: f64 },
    /// Cauchy class `(1 + (r/ell)^alpha)^(-beta/alpha)`.
    Cauchy { ell: f64, alpha: f64, beta: f64 },
    /// `exp(-r / ell)`, the Matérn kernel with `nu = 1/2`.
    Exponential { ell: f64 },
}

/// A covariance family plus a nugget `sigma2` added to the diagonal at
/// assembly time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub nugget: f64,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be finite and positive, got {v}")))
    }
}

impl KernelSpec {
    pub fn new(family: KernelFamily, nugget: f64) -> Result<Self> {
        let spec = KernelSpec { family, nugget };
        spec.validate()?;
        Ok(spec)
    }

    pub fn matern(nu: f64, ell: f64) -> Result<Self> {
        Self::new(KernelFamily::Matern { nu, ell }, 0.0)
    }

    pub fn cauchy(ell: f64, alpha: f64, beta: f64) -> Result<Self> {
        Self::new(KernelFamily::Cauchy { ell, alpha, beta }, 0.0)
    }

    pub fn exponential(ell: f64) -> Result<Self> {
        Self::new(KernelFamily::Exponential { ell }, 0.0)
    }

    pub fn with_nugget(self, nugget: f64) -> Result<Self> {
        Self::new(self.family, nugget)
    }

    pub fn validate(&self) -> Result<()> {
        match self.family {
            KernelFamily::Matern { nu, ell } => {
                positive("nu", nu)?;
                positive("l", ell)?;
            }
            KernelFamily::Cauchy { ell, alpha, beta } => {
                positive("l", ell)?;
                positive("beta", beta)?;
                if !(alpha > 0.0 && alpha <= 2.0) {
                    return Err(Error::InvalidParameter(format!("alpha must lie in (0, 2], got {alpha}")));
                }
            }
            KernelFamily::Exponential { ell } => positive("l", ell)?,
        }
        if !(self.nugget.is_finite() && self.nugget >= 0.0) {
            return Err(Error::InvalidParameter(format!("nugget must be finite and >= 0, got {}", self.nugget)));
        }
        Ok(())
    }

    fn ell(&self) -> f64 {
        match self.family {
            KernelFamily::Matern { ell, .. } | KernelFamily::Cauchy { ell, .. } | KernelFamily::Exponential { ell } => ell,
        }
    }

    /// Covariance at distance `r`, without the nugget.
    pub fn eval(&self, r: f64) -> Result<f64> {
        if !(r.is_finite() && r >= 0.0) {
            return Err(Error::InvalidParameter(format!("distance must be finite and >= 0, got {r}")));
        }
        self.validate()?;
        Ok(self.eval_unchecked(r))
    }

    /// [`eval`](Self::eval) without validation, for assembly loops.
    #[inline]
    pub fn eval_unchecked(&self, r: f64) -> f64 {
        if r < 1e-12 * self.ell() {
            return 1.0;
        }
        match self.family {
            KernelFamily::Exponential { ell } => (-r / ell).exp(),
            KernelFamily::Cauchy { ell, alpha, beta } => (1.0 + (r / ell).powf(alpha)).powf(-beta / alpha),
            KernelFamily::Matern { nu, ell } => matern(nu, ell, r),
        }
    }
}

fn matern(nu: f64, ell: f64, r: f64) -> f64 {
    let z = (2.0 * nu).sqrt() * r / ell;
    if nu == 0.5 {
        (-z).exp()
    } else if nu == 1.5 {
        (1.0 + z) * (-z).exp()
    } else if nu == 2.5 {
        (1.0 + z + z * z / 3.0) * (-z).exp()
    } else {
        matern_bessel(nu, z)
    }
}

/// `2^(1-nu) / Gamma(nu) z^nu K_nu(z)` through the Bessel routine, for any
/// `nu > 0`.
pub fn matern_bessel(nu: f64, z: f64) -> f64 {
    if z > 745.0 {
        return 0.0;
    }
    let k = bessel_k(nu, z);
    if k == 0.0 {
        return 0.0;
    }
    ((1.0 - nu) * std::f64::consts::LN_2 - ln_gamma(nu) + nu * z.ln() + k.ln()).exp()
}

impl fmt::Display for KernelSpec {
    /// Canonical `family:key=value,...` form; the nugget is not included.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            KernelFamily::Matern { nu, ell } => write!(f, "matern:nu={nu},l={ell}"),
            KernelFamily::Cauchy { ell, alpha, beta } => write!(f, "cauchy:l={ell},alpha={alpha},beta={beta}"),
            KernelFamily::Exponential { ell } => write!(f, "exp:l={ell}"),
        }
    }
}

impl FromStr for KernelSpec {
    type Err = Error;

    /// Parses `matern:nu=1.0,l=0.2`, `cauchy:l=0.4,alpha=0.5,beta=0.025` or
    /// `exp:l=0.2`. The nugget starts at zero.
    fn from_str(s: &str) -> Result<Self> {
        let (name, params) = s.split_once(':').unwrap_or((s, ""));
        let mut values: Vec<(&str, f64)> = Vec::new();
        for item in params.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::InvalidParameter(format!("expected key=value, got `{item}`")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("field `{}` is not a number: `{v}`", k.trim())))?;
            values.push((k.trim(), v));
        }
        let allowed: &[&str] = match name.trim() {
            "matern" => &["nu", "l"],
            "cauchy" => &["l", "alpha", "beta"],
            "exp" => &["l"],
            other => return Err(Error::InvalidParameter(format!("unknown kernel family `{other}`"))),
        };
        if let Some((k, _)) = values.iter().find(|(k, _)| !allowed.contains(k)) {
            return Err(Error::InvalidParameter(format!("unknown field `{k}` for kernel `{}`", name.trim())));
        }
        let get = |key: &str| {
            values
                .iter()
                .rev()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| *v)
                .ok_or_else(|| Error::InvalidParameter(format!("missing kernel field `{key}`")))
        };
        let family = match name.trim() {
            "matern" => KernelFamily::Matern { nu: get("nu")?, ell: get("l")? },
            "cauchy" => KernelFamily::Cauchy { ell: get("l")?, alpha: get("alpha")?, beta: get("beta")? },
            _ => KernelFamily::Exponential { ell: get("l")? },
        };
        KernelSpec::new(family, 0.0)
    }
}

/// Symmetric matrix stored as its lower triangle on a sparsity pattern.
///
/// Row and column `k` correspond to original point `perm[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymmetric {
    pub pattern: SparsityPattern,
    pub values: Vec<f64>,
    pub perm: Vec<usize>,
}

impl SparseSymmetric {
    pub fn new(pattern: SparsityPattern, values: Vec<f64>, perm: Vec<usize>) -> Result<Self> {
        if values.len() != pattern.nnz() {
            return Err(Error::DimensionMismatch { expected: pattern.nnz(), found: values.len() });
        }
        if perm.len() != pattern.n() {
            return Err(Error::DimensionMismatch { expected: pattern.n(), found: perm.len() });
        }
        crate::ordering::invert_permutation(&perm)?;
        Ok(SparseSymmetric { pattern, values, perm })
    }

    /// Fills every stored entry `(row, col)` with `entry(perm[row], perm[col])`.
    pub fn from_fn(pattern: SparsityPattern, perm: Vec<usize>, mut entry: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let values = pattern.entries().map(|(r, c)| entry(perm[r], perm[c])).collect();
        Self::new(pattern, values, perm)
    }

    pub fn n(&self) -> usize {
        self.pattern.n()
    }

    /// Entry at order positions `(i, j)`; zero outside the pattern.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        self.pattern.find(r, c).map_or(0.0, |p| self.values[p])
    }
}

/// Kernel matrix entries on `pattern`, in the ordering `perm`
/// (position -> original index), with the nugget added to the diagonal.
pub fn assemble(cloud: &PointCloud, spec: &KernelSpec, pattern: &SparsityPattern, perm: &[usize]) -> Result<SparseSymmetric> {
    spec.validate()?;
    if pattern.n() != cloud.len() {
        return Err(Error::DimensionMismatch { expected: cloud.len(), found: pattern.n() });
    }
    if perm.len() != cloud.len() {
        return Err(Error::DimensionMismatch { expected: cloud.len(), found: perm.len() });
    }
    let mut values = Vec::with_capacity(pattern.nnz());
    for j in 0..pattern.n() {
        let pj = perm[j];
        for &i in pattern.column(j) {
            let mut v = spec.eval_unchecked(cloud.dist(perm[i], pj));
            if i == j {
                v += spec.nugget;
            }
            values.push(v);
        }
    }
    SparseSymmetric::new(pattern.clone(), values, perm.to_vec())
}

/// Row-major dense matrix, used by the reference routines and tests.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    pub n: usize,
    pub data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        DenseMatrix { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.data[i * n + j] = f(i, j);
            }
        }
        m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        self.data.chunks_exact(self.n).map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Dense kernel matrix in original index order, nugget included.
pub fn dense_kernel_matrix(cloud: &PointCloud, spec: &KernelSpec) -> Result<DenseMatrix> {
    spec.validate()?;
    let n = cloud.len();
    Ok(DenseMatrix::from_fn(n, |i, j| {
        let v = spec.eval_unchecked(cloud.dist(i, j));
        if i == j {
            v + spec.nugget
        } else {
            v
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::gen_uniform;
    use crate::ordering::maximin_fast;

    #[test]
    fn zero_lag_is_one() {
        for spec in [
            KernelSpec::matern(1.3, 0.2).unwrap(),
            KernelSpec::matern(0.5, 0.2).unwrap(),
            KernelSpec::cauchy(0.4, 0.5, 0.025).unwrap(),
            KernelSpec::exponential(0.1).unwrap(),
        ] {
            assert_eq!(spec.eval(0.0).unwrap(), 1.0);
        }
    }

    #[test]
    fn matern_half_matches_exponential_and_bessel() {
        let m = KernelSpec::matern(0.5, 0.2).unwrap();
        let want = (-1.0f64).exp();
        assert!((m.eval(0.2).unwrap() - want).abs() < 1e-15);
        assert!((matern_bessel(0.5, 1.0) - want).abs() / want < 1e-13);
        let e = KernelSpec::exponential(0.2).unwrap();
        for r in [0.01, 0.1, 0.5, 2.0] {
            let (a, b) = (m.eval(r).unwrap(), e.eval(r).unwrap());
            assert!((a - b).abs() <= 1e-14 * b);
        }
    }

    #[test]
    fn closed_forms_agree_with_bessel_path() {
        for nu in [1.5, 2.5] {
            let k = KernelSpec::matern(nu, 0.3).unwrap();
            for r in [1e-6, 0.05, 0.3, 1.0, 4.0] {
                let z = (2.0 * nu).sqrt() * r / 0.3;
                let a = k.eval(r).unwrap();
                assert!((a - matern_bessel(nu, z)).abs() <= 1e-12 * a, "nu={nu} r={r}");
            }
        }
    }

    #[test]
    fn cauchy_value() {
        let c = KernelSpec::cauchy(1.0, 1.0, 1.0).unwrap();
        assert_eq!(c.eval(1.0).unwrap(), 0.5);
    }

    #[test]
    fn monotone_decay() {
        for spec in [
            KernelSpec::matern(0.3, 0.2).unwrap(),
            KernelSpec::matern(1.0, 0.2).unwrap(),
            KernelSpec::matern(2.5, 0.2).unwrap(),
            KernelSpec::cauchy(0.4, 0.5, 0.025).unwrap(),
            KernelSpec::cauchy(0.2, 2.0, 0.2).unwrap(),
            KernelSpec::exponential(0.2).unwrap(),
        ] {
            let mut prev = f64::INFINITY;
            for k in 0..2000 {
                let v = spec.eval(k as f64 * 1e-3).unwrap();
                assert!(v <= prev, "{spec} not monotone at r={}", k as f64 * 1e-3);
                prev = v;
            }
        }
    }

    #[test]
    fn continuity_across_half_integer() {
        let at = |nu: f64| KernelSpec::matern(nu, 0.2).unwrap().eval(0.2).unwrap();
        let base = at(0.5);
        assert!((at(0.5 + 1e-6) - base).abs() <= 1e-5);
        assert!((at(0.5 - 1e-6) - base).abs() <= 1e-5);
    }

    #[test]
    fn invalid_inputs() {
        assert!(KernelSpec::matern(0.0, 1.0).is_err());
        assert!(KernelSpec::matern(1.0, -1.0).is_err());
        assert!(KernelSpec::cauchy(1.0, 2.5, 1.0).is_err());
        assert!(KernelSpec::exponential(1.0).unwrap().with_nugget(-0.1).is_err());
        assert!(KernelSpec::exponential(1.0).unwrap().eval(-1.0).is_err());
        assert!(KernelSpec::exponential(1.0).unwrap().eval(f64::NAN).is_err());
    }

    #[test]
    fn parse_and_display() {
        let k: KernelSpec = "matern:nu=1.0,l=0.2".parse().unwrap();
        assert_eq!(k, KernelSpec::matern(1.0, 0.2).unwrap());
        assert_eq!(k.to_string(), "matern:nu=1,l=0.2");
        let k: KernelSpec = "cauchy:l=0.4,alpha=0.5,beta=0.025".parse().unwrap();
        assert_eq!(k, KernelSpec::cauchy(0.4, 0.5, 0.025).unwrap());
        assert_eq!(k.to_string().parse::<KernelSpec>().unwrap(), k);
        let k: KernelSpec = "exp:l=0.2".parse().unwrap();
        assert_eq!(k, KernelSpec::exponential(0.2).unwrap());

        let err = "matern:nu=1.0".parse::<KernelSpec>().unwrap_err().to_string();
        assert!(err.contains("`l`"), "{err}");
        let err = "cauchy:l=0.4,alpha=0.5".parse::<KernelSpec>().unwrap_err().to_string();
        assert!(err.contains("`beta`"), "{err}");
        assert!("gauss:l=1".parse::<KernelSpec>().is_err());
        assert!("exp:l=abc".parse::<KernelSpec>().is_err());
        assert!("exp:l=1,nu=2".parse::<KernelSpec>().is_err());
    }

    #[test]
    fn assembly() {
        let cloud = gen_uniform(50, 2, 4).unwrap();
        let spec = KernelSpec::matern(1.0, 0.2).unwrap();
        let perm: Vec<usize> = (0..50).collect();

        let diag = assemble(&cloud, &spec, &SparsityPattern::diagonal(50), &perm).unwrap();
        assert!(diag.values.iter().all(|&v| v == 1.0));
        let nug = assemble(&cloud, &spec.with_nugget(0.1).unwrap(), &SparsityPattern::diagonal(50), &perm).unwrap();
        assert!(nug.values.iter().all(|&v| v == 1.1));

        let r = maximin_fast(&cloud, 2.0).unwrap();
        let full = assemble(&cloud, &spec, &SparsityPattern::full(50), r.ordering.perm()).unwrap();
        let dense = dense_kernel_matrix(&cloud, &spec).unwrap();
        for i in 0..50 {
            for j in 0..50 {
                let want = dense.get(r.ordering.perm()[i], r.ordering.perm()[j]);
                assert!((full.get(i, j) - want).abs() <= 1e-14 * want.abs());
            }
        }
        assert!(assemble(&cloud, &spec, &SparsityPattern::diagonal(49), &perm[..49]).is_err());
    }
}
