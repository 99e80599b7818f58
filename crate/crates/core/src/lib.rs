//! Exact symbolic engine for polynomial differential-difference systems.
//!
//! Given `u̇ = F(u)` on a one-dimensional lattice, the crate computes
//! dilation weights, conserved densities with fluxes, generalized
//! symmetries and recursion operators, and checks every result against its
//! defining identity with exact rational arithmetic.
//!
//! ```
//! use lik_core::{compute_weights, parse_system, WeightOutcome, WeightVector};
//!
//! let toda = parse_system("u' = v[-1] - v[0]\nv' = v[0]*(u[0] - u[1])").unwrap();
//! assert_eq!(
//!     compute_weights(&toda, &[]),
//!     WeightOutcome::Unique(WeightVector::from_ints(&[1, 2]))
//! );
//! ```

pub mod conservation;
pub mod error;
pub mod expr;
pub mod linalg;
pub mod param;
pub mod parse;
pub mod recursion;
pub mod scaling;
pub mod symmetry;
pub mod system;

pub use error::{Error, Result};
pub use expr::{
    antidifference, canonical_rep, delta_decompose, total_time_derivative, Antidifference,
    Decomposition, LatticeMonomial, LatticePoly, Symbols, VarRef,
};
pub use linalg::{nullspace, parametric_solve, Branch, BranchOutcome, LinearSystem};
pub use param::ParamCoeff;
pub use parse::{
    parse_density_file, parse_operator_file, parse_poly, parse_system, parse_vector_file,
};
pub use recursion::{
    solve_recursion, verify_recursion, ConstraintFamily, DiffOperator, ExtendedExpr, NoSolution,
    OpEntry, RecursionSolution,
};
pub use scaling::{compute_weights, rank_of, WeightOutcome, WeightVector};
pub use system::DdeSystem;
