//! Steady-state covariance of Gaussian Markov processes
//! `dX = M X dt + C^{1/2} dW` along three cross-validating routes:
//!
//! * a dense Lyapunov solve of `M S + S M^T + C = 0` via Kronecker
//!   vectorization ([`solve_lyapunov`]),
//! * a globally convergent matrix power series with a certified tail
//!   bound ([`sigma_series`]),
//! * exact finite trek polynomials for acyclic drift graphs
//!   ([`sigma_acyclic`], [`sigma_acyclic_unit_diagonal`]).
//!
//! On top of those sit the trek machinery itself (enumeration, weights,
//! per-trek series coefficients), closed-form path and factor models, a
//! lower bound on the last marginal variance of triangular models, the
//! two-index H series with its extension identity, and linear additive
//! noise models for structural comparison.
//!
//! The crate is `no_std`-compatible: disable the default `std` feature
//! and enable `libm` to build against `core` + `alloc` alone.

#![cfg_attr(not(feature = "std"), no_std)]
#![forbid(unsafe_code)]
// Guards are written as `!(x > 0.0)` on purpose: unlike `x <= 0.0`
// they also reject NaN. Index loops and explicit range bounds are kept
// where the indices and bounds are themselves the mathematics.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]
#![allow(clippy::manual_range_contains)]

extern crate alloc;

#[cfg(all(not(feature = "std"), not(feature = "libm")))]
compile_error!("building without `std` requires the `libm` feature for float math");

mod acyclic;
mod error;
mod graph;
mod lan;
mod linalg;
mod lyapunov;
mod matrix;
mod num;
mod series;
mod stability;
mod trek;

pub use acyclic::{
    d_extension_identity_check, factor_model_sigma, h_function, path_model_sigma, sigma_acyclic,
    sigma_acyclic_unit_diagonal, tetrad, topological_order, variance_lower_bound, TopologicalOrder,
};
pub use error::{Error, Result};
pub use graph::MixedGraph;
pub use lan::{lan_sigma, lan_variance_decomposition, LanModel};
pub use lyapunov::{integral_quadrature, residual, solve_lyapunov, SolveReport};
pub use matrix::DenseMatrix;
pub use series::{d_coefficient, sigma_base_trek_series, sigma_series, SeriesResult};
pub use stability::{is_stable, rescale_to_contraction, spectral_radius_estimate};
pub use trek::{
    enumerate_base_treks, enumerate_treks, partial_sum, rho, trek_term, trek_weight, BaseTrek,
    SelfLoopProfile, Trek,
};
