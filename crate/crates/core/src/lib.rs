//! Symbolic-numeric toolkit for higher-order Lagrangian dynamics in the
//! unified velocity-momentum phase space.
//!
//! Starting from a regular Lagrangian of order `k` on `n` coordinates, the
//! crate derives the generalized momenta (Legendre-Ostrogradsky map), the
//! Hamiltonian, and the dynamical vector field on the unified space, then
//! verifies candidate Hamilton-Jacobi sections by symbolic residual
//! generation, grid evaluation, and flow integration.
//!
//! The layers, bottom to top:
//!
//! - [`symexpr`]: normalized expression trees with exact rational constants.
//! - [`jetspace`]: coordinate atlases, projections, total time derivative.
//! - [`dynamics`]: Hessian/regularity, Euler-Lagrange expressions, the
//!   top-order forcing functions, Legendre map, Hamiltonian, vector field.
//! - [`hj`]: candidate sections and the four Hamilton-Jacobi residual
//!   families, plus conversions to and from the Lagrangian and Hamiltonian
//!   pictures.
//! - [`ode`]: fixed-step flows and the lifting/projection/energy checks.
//! - [`fixtures`]: built-in reference systems used by tests and docs.
//! - [`commands`]: problem files, reports, and the batch entry points that
//!   back the `unihj` binary.

pub mod commands;
pub mod dynamics;
pub mod fixtures;
pub mod hj;
pub mod jetspace;
mod linalg;
pub mod ode;
pub mod scalar;
pub mod symexpr;

/// Default scalar used by the command layer and fixtures.
pub type Real = f64;
/// Coordinate assignment over the default scalar.
pub type RealPoint = jetspace::Point<Real>;
/// Flow samples over the default scalar.
pub type RealTrajectory = ode::Trajectory<Real>;
