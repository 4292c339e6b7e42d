//! Asymptotic variance of time averages of Markov processes.
//!
//! `sigma^2(X, f) = 2 (Gf, f)_pi` is computed exactly for finite chains
//! ([`chain`]), through its min-max characterization ([`varform`]), by
//! quadrature for reflected diffusions on the half-line ([`diffusion1d`])
//! and by batch means from simulated paths ([`montecarlo`]). [`exittime`]
//! compares mean exit times with the variance of an indicator.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chain;
pub mod diffusion1d;
pub mod error;
pub mod exittime;
pub mod fixtures;
mod linalg;
pub mod montecarlo;
pub mod varform;

pub use error::{Error, ErrorClass, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/chains.md")]
    mod chains {}
    #[doc = include_str!("../../../book/src/variational.md")]
    mod variational {}
    #[doc = include_str!("../../../book/src/diffusion.md")]
    mod diffusion {}
    #[doc = include_str!("../../../book/src/montecarlo.md")]
    mod montecarlo {}
    #[doc = include_str!("../../../book/src/exittime.md")]
    mod exittime {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
