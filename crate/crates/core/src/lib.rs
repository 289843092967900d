//! Sparse Cholesky factors of kernel matrices in the maximin ordering.
//!
//! See the guide under `book/` for a walkthrough. The usual entry point is
//! [`ichol::factor_kernel`].

pub mod bessel;
pub mod error;
pub mod geometry;
pub mod heap;
pub mod ichol;
pub mod io;
pub mod kernels;
pub mod linalg;
pub mod metrics;
pub mod ordering;
pub mod supernodal;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    struct Introduction;
    #[doc = include_str!("../../../book/src/ordering.md")]
    struct Ordering;
    #[doc = include_str!("../../../book/src/factorization.md")]
    struct Factorization;
    #[doc = include_str!("../../../book/src/supernodal.md")]
    struct Supernodal;
    #[doc = include_str!("../../../book/src/operations.md")]
    struct Operations;
    #[doc = include_str!("../../../book/src/precision.md")]
    struct Precision;
    #[doc = include_str!("../../../book/src/accuracy.md")]
    struct Accuracy;
    #[doc = include_str!("../../../book/src/cli.md")]
    struct Cli;
}
