//! Optimal-transport solvers.

pub mod hungarian;
pub mod semidiscrete;
pub mod sinkhorn;

pub use hungarian::{hungarian_w2, solve_assignment, MAX_ASSIGNMENT_SIZE};
pub use semidiscrete::{
    default_mass_tol, lloyd_cvt, power_assign, semidiscrete_solve, LloydOptions, LloydResult,
    PowerCellStats, SemiDiscreteOptions, SemiDiscretePlanWeights, SemiDiscreteSolution,
};
pub use sinkhorn::{
    sinkhorn, sinkhorn_divergence, sinkhorn_grad_x, sinkhorn_self, sinkhorn_self_grad, Divergence,
    SinkhornOptions, SinkhornResult,
};
