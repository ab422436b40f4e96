//! PCDM1 / PCDM2 iterations, traces and complexity calculators.

mod bounds;
mod pcdm;
mod trace;
mod update;

pub use bounds::{
    iteration_bound_convex, iteration_bound_strongly_convex, speedup_factor, speedup_from_certificate, ConvexBound,
};
pub use pcdm::{
    run, separable_model, snapshot_updates, ExecutionMode, Solver, SolverConfig, SolverState, StepInfo, Variant,
};
pub use trace::{Trace, TraceRecord};
pub use update::{block_update, block_update_into};
