//! Lagrange finite elements of degree 1 and 2 on triangles.
//!
//! The finite element energy of a function `g` only depends on its nodal
//! values. [`FemEnergy`] evaluates it together with its gradient with respect
//! to those values, which is all that is needed to train a network through
//! its interpolant.

mod assembly;
mod energy;
mod space;
mod sparse;

pub use assembly::{
    assemble_load_lumped, assemble_mass, assemble_nitsche, assemble_stiffness, NitscheTerms,
};
pub(crate) use assembly::assemble_volume;
pub use energy::{
    error_norms, galerkin_solve, h1_norm, lumped_mass_ratio, FemEnergy, GalerkinSolution,
    StabilityConstants, GALERKIN_TOL,
};
pub use space::{FeSpace, LagrangeBasis, NodalVector, MAX_LOCAL_DOFS};
pub use sparse::{conjugate_gradient, CgOutcome, SparseMatrix, TripletBuilder};
