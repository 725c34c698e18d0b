//! Embedded linear and mixed-integer programming.
//!
//! The LP engine is a bounded revised dual simplex over a sparse LU
//! factorization with product-form updates. The MIP layer runs best-bound
//! branch-and-bound where every integer variable belongs to an exactly-one
//! selector group, which is the structure produced by piecewise-linear
//! approximations with segment selectors.

mod branch;
pub mod lp_format;
mod lu;
mod model;
mod simplex;

pub use branch::{
    solve_lp, BranchAndBound, Heuristic, LpSolution, MipOptions, MipOutcome, MipStatus,
};
pub use model::{
    Comparator, Constraint, LinearProgram, MixedIntegerProgram, SelectorGroup, VarId, Variable,
};
pub use simplex::{Basis, DualSimplex, LpStatus};

use thiserror::Error;

/// Structural problems found when validating a model.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("variable {var} has invalid bounds [{lower}, {upper}]")]
    BadBounds { var: usize, lower: f64, upper: f64 },
    #[error("row {row} has a non-finite coefficient or right-hand side")]
    NonFinite { row: usize },
    #[error("row {row} references undeclared variable {var}")]
    UnknownVariable { row: usize, var: usize },
    #[error("binary variable {var} has bounds outside [0, 1]")]
    BinaryBounds { var: usize },
    #[error("selector group {group} lacks its exactly-one row")]
    MissingGroupRow { group: usize },
    #[error("selector group {group} contains non-binary variable {var}")]
    NonBinaryMember { group: usize, var: usize },
}

/// Failures of the LP or MIP solve itself.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("problem is infeasible")]
    Infeasible,
    #[error("problem is unbounded")]
    Unbounded,
    #[error("simplex iteration limit reached")]
    IterationLimit,
    #[error("limit reached before any feasible solution was found")]
    NoIncumbent,
    #[error("numerical failure: {0}")]
    Numerical(String),
}
