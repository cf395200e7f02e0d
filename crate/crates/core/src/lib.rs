//! Adaptive hybridizable discontinuous Galerkin (HDG) solver for
//! convection-dominated convection-diffusion problems on triangulations of
//! the plane.
//!
//! The crate is organised the way the adaptive cycle runs:
//!
//! * [`mesh`]: conforming triangulations, geometry queries, newest vertex
//!   bisection and the plain-text mesh format.
//! * [`fem`]: orthonormal polynomial bases, quadrature rules and L²
//!   projections.
//! * [`problems`]: the benchmark problem bank.
//! * [`hdg`]: local assembly, static condensation and local recovery.
//! * [`linsolve`]: sparse direct solver for the condensed skeleton system.
//! * [`estimator`]: the residual a posteriori error estimator and error norms.
//! * [`adapt`]: bulk marking and the SOLVE → ESTIMATE → MARK → REFINE loop.
//! * [`cli`]: the experiment runner behind the `hdg-adapt` binary.

pub mod adapt;
pub mod cli;
pub mod error;
pub mod estimator;
pub mod fem;
pub mod hdg;
pub mod linsolve;
pub mod mesh;
pub mod problems;

pub use error::{Error, Result};

/// A point of the plane.
pub type Point = nalgebra::Point2<f64>;
/// A vector of the plane.
pub type Vec2 = nalgebra::Vector2<f64>;
