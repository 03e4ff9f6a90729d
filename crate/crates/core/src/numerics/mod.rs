//! Small dense linear algebra, adaptive ODE integration and finite
//! differences shared by the rest of the crate.

mod diff;
mod linalg;
mod ode;

pub use diff::{finite_difference, try_finite_difference};
pub use linalg::{
    add, axpy, distance, dot, eigenvalues, least_squares, norm1, norm2, scaled, singular_values,
    solve_linear, sub, symmetric_eigenvalues, DenseMatrix, Vector, PIVOT_THRESHOLD,
};
pub use ode::{integrate_ode, IntegratorConfig, OdeStats, OdeStepper};
