//! Parallel block coordinate descent (PCDM1/PCDM2) for composite problems
//! `F(x) = f(x) + Ω(x)` where `f` is partially separable over a sparse data
//! matrix and `Ω` is block separable.
//!
//! The crate is organised bottom-up:
//!
//! * [`sparse`] and [`problem`] describe the objective, its block structure,
//!   the degree of partial separability ω and the block Lipschitz constants.
//! * [`sampling`] holds the random block-selection laws together with their
//!   exact moments and enumerated densities.
//! * [`eso`] computes `(β, w)` step-size certificates for each law and checks
//!   them statistically.
//! * [`solver`] runs the synchronous parallel iterations and evaluates the
//!   complexity and speedup formulas.
//! * [`datagen`] and [`io`] produce and read instances; [`experiments`] wires
//!   the empirical harnesses used by the command-line tool.

pub mod datagen;
pub mod error;
pub mod eso;
pub mod experiments;
pub mod io;
pub mod problem;
pub mod sampling;
pub mod solver;
pub mod sparse;

pub use error::{Error, Result};
pub use eso::EsoParams;
pub use problem::{BlockStructure, CompositeProblem, LossKind, Objective, Regularizer, Workspace};
pub use sampling::{SamplingLaw, SamplingMoments};
pub use solver::{ExecutionMode, SolverConfig, Trace, Variant};
pub use sparse::SparseMatrix;
