//! Additive convex Lyapunov functions and the Riemannian gradient-flow
//! structure of linear consensus systems.
//!
//! The crate builds graph Laplacians, integrates linear and nonlinear
//! consensus dynamics, evaluates additive Lyapunov functionals
//! `V(x) = beta sum_i q_i H(c x_i)`, constructs the state-dependent inverse
//! metric `G^{-1}(x)` under which `x' = -L x` is a gradient descent of `V`,
//! and packages the resulting identities as reproducible checks.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod flow;
pub mod graph;
pub mod metric;
pub mod potential;
pub mod scalar;
pub mod scenario;
pub mod verify;

pub use error::{Error, Result};
pub use graph::{
    build_laplacian, incidence, is_strongly_connected, perron_vector, Edge, IncidenceMatrix,
    LaplacianMatrix, PerronVector, WeightedDigraph,
};
pub use potential::{
    builtin_entropy, builtin_gibbs, builtin_quadratic, AdditiveLyapunov, ConvexPotential,
};
pub use scalar::{divided_difference, log_mean, ScalarFn};
