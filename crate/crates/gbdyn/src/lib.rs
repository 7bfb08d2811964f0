//! Gray-box dynamics learning for mechanical systems.
//!
//! Instead of fitting the equations of motion as an arbitrary map
//! `(q, q̇, u) → q̈`, a mechanical system is parameterized by the pieces of its
//! manipulator equation
//!
//! ```text
//!     M(q)·q̈ + C(q,q̇)·q̇ + ∇V(q) = F(q,q̇,u)
//! ```
//!
//! where the mass matrix `M`, the potential `V`, and the generalized forces
//! `F` are each either an analytic (white-box) component with a handful of
//! physical parameters, or a small twice-differentiable neural network.
//! Accelerations follow from a positive-definite solve, states are propagated
//! with fixed-step RK4, and all parameters are trained by gradient descent on
//! a one-step prediction loss.
//!
//! Module map:
//!
//! - [`engine`] — differentiable computation graphs: exact input Jacobians by
//!   forward-mode tangents, exact parameter gradients by reverse mode, Adam,
//!   and finite-difference checking.
//! - [`dynamics`] — model components, manipulator-equation assembly, RK4
//!   stepping and rollouts.
//! - [`systems`] — the ground-truth actuated double pendulum, transition
//!   sampling, and dataset files.
//! - [`modelzoo`] — every white-box/learned parameterization lattice entry
//!   plus the naive baseline; checkpoint (de)serialization.
//! - [`training`] — the RK4 prediction loss, the training loop, and the
//!   data-efficiency doubling sweep.
//! - [`control`] — direct collocation, TVLQR tracking, and the model-based RL
//!   swing-up loop.
//! - [`config`] — flat key/value run configuration shared with the `gbdyn`
//!   command-line binary.
//!
//! See the crate `examples/` for a runnable tour of each capability.

pub mod config;
pub mod control;
pub mod dynamics;
pub mod engine;
pub mod modelzoo;
pub mod systems;
pub mod training;

mod error;

pub use error::{Error, Result};
