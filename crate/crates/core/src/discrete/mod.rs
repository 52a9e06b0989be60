//! Finite-volume discretisation of the transition operator and its inverse.

mod grid;
mod operator;
pub mod tridiag;

pub use grid::{Field, Grid, MIN_CELLS};
pub use operator::{
    assemble_interior_jump, assemble_operator, birth_weights, green_column, leading_eigenvalue, sample_weights,
    solve_inverse, BoundaryKind, DiscreteOperator, JumpRow, PECLET_LIMIT, RESIDUAL_TOL,
};
