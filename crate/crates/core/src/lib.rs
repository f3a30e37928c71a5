//! Numerics for the generalized alternating Dirichlet family
//! `eta_a(t) = sum_{m>=0} (-1)^m (a*m+1)^{-t}` and the dynamics of its
//! logarithmic derivative.
//!
//! The crate has five layers:
//!
//! - [`series`]: direct, compensated evaluation of `eta_a` and its
//!   term-by-term derivative series. This is the reference estimator that
//!   every table and figure in the crate reproduces.
//! - [`fastderiv`]: the geometric-rate (1/3) forward-difference algorithm
//!   for `eta_a^(k)(t)`, with the sharp combinatorial coefficient bound and
//!   a certified truncation bound. Converges uniformly in `t`, so it also
//!   serves as the high-accuracy evaluator where the direct series is slow.
//! - [`riccati`]: the Riccati field `phi = eta'/eta`, its forcing
//!   `q = eta''/eta`, reference curve, asymptotic manifold, trapping
//!   thresholds, curvature identities and the linearized contraction factor.
//! - [`mc`]: Monte Carlo validation of the probabilistic layer (Gamma
//!   marginals, the S_k variables, and the expectation identities).
//! - [`sonify`]: maps a Riccati trajectory to a melody and serializes it as
//!   a Standard MIDI File.

pub mod dd;
mod error;
pub mod fastderiv;
pub mod mc;
pub mod parallel;
pub mod riccati;
pub mod series;
pub mod sonify;

pub use error::{Error, Result};
pub use series::{EtaPoint, SeriesAccuracy, SeriesResult};
