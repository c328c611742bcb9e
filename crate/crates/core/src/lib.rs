//! Duality-gap shrinkage priors.
//!
//! A proximal mapping `prox_g(beta) = argmin_z 1/2 |beta - z|^2 + g(z)` rarely has a closed
//! form, but its primal-dual gap does. Exponentiating the negative gap gives a continuous
//! prior on `(theta, u, beta)` that concentrates near the exact projection without ever
//! computing it. This crate provides
//!
//! * [`gapcore`]: penalty algebra (values, conjugates, support functions) and gap functions,
//! * [`oracles`]: exact or high-accuracy proximal solvers used to certify the gap bounds,
//! * [`priors`]: unnormalized log-densities of the resulting priors and tail quadrature,
//! * [`samplers`]: blocked Gibbs samplers for sparse regression, low-rank plus sparse matrix
//!   smoothing and fused probit regression, plus the Bayesian lasso and GDP comparators,
//! * [`diagnostics`]: ACF, ESS and posterior summaries,
//! * [`certify`]: randomized certification suites tying the gaps to the oracles.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certify;
pub mod diagnostics;
pub mod error;
pub mod extended;
pub mod gapcore;
pub mod linalg;
pub mod oracles;
pub mod priors;
pub mod quadrature;
pub mod rng;
pub mod samplers;

pub use error::{GapError, Result};
pub use extended::ExtReal;
