//! Difference operators with nonlocal terms and recursion-operator search.

mod operator;
mod solve;

pub use operator::{DiffOperator, ExtendedExpr, LocalOpTerm, NonlocalOpTerm, OpEntry};
pub use solve::{
    build_r0, build_r1, coefficient_groups, cofactor_pool, covariant, covariant_rank_bound,
    defining_operator, logarithmic_densities, pool_monomials, probe_residual, proportional,
    rank_matrix, render_coefficients, shift_window, solve_recursion, vector_ranks,
    verify_recursion, ConstraintFamily, Covariant, LocalBlock, NoSolution, NonlocalBlock,
    RankMatrix, RecursionCandidate, RecursionProblem, RecursionReport, RecursionSolution,
};
