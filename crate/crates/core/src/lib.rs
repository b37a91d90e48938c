//! Deep Ritz solvers for 2-D elliptic problems.
//!
//! A neural network `u` is trained to minimise the Dirichlet energy
//! `1/2 |grad u|^2 - f u` over the unit square. Three discretisations of the
//! energy integral are provided:
//!
//! * Monte-Carlo collocation at freshly drawn points ([`training::McLoss`]),
//! * deterministic quadrature collocation on a triangulation ([`training::QuadLoss`]),
//! * finite element interpolation, where the network only enters through its
//!   nodal values and the energy becomes a quadratic form ([`training::FemLoss`]).
//!
//! Dirichlet data is imposed weakly with an `alpha / h_e` edge penalty. A
//! conjugate-gradient Galerkin solver ([`fem::galerkin_solve`]) gives the exact
//! minimiser of the finite element energy and is used as a lower-bound oracle.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod elliptic;
pub mod error;
pub mod fem;
pub mod harness;
pub mod mesh;
pub mod network;
pub mod quadrature;
pub mod training;

pub use error::{Error, Result};

/// A point of the plane.
pub type Point = [f64; 2];
