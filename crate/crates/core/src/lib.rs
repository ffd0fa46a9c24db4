//! Numerical core for studying the stationary behaviour of projected SGD on
//! the unit sphere.
//!
//! The crate is `no_std` (it needs `alloc`) and contains no IO. It provides:
//!
//! * [`sphere`]: projected SGD with seeded batch sampling and log-spaced
//!   checkpoint logging.
//! * [`loss`]: scale-invariant loss ensembles (great circles on the 3-sphere,
//!   their D-dimensional hyperplane generalisation) and quadratic ensembles.
//! * [`entropy`]: the k-nearest-neighbour graph entropy estimator.
//! * [`metrics`]: full/stochastic gradient norms and the gradient SNR.
//! * [`analysis`]: smoothing, stationary values, free-energy temperature
//!   intervals, finite-difference temperature and power-law fits.
//! * [`oracles`]: closed-form SNR expressions for the two-circle toy model and
//!   for quadratic ensembles.

#![no_std]
#![deny(missing_docs)]
// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod analysis;
pub mod entropy;
mod error;
pub mod linalg;
pub mod loss;
pub mod metrics;
pub mod oracles;
pub mod rng;
pub mod sphere;

pub use error::{Error, Result};
pub use loss::LossEnsemble;
pub use metrics::Snr;
pub use sphere::UnitWeights;
