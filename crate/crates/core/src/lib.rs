//! Solvers for systems of nonlinear equations `F(x) = 0`, posed as the
//! minimisation of `f(x) = ||F(x)||²`.
//!
//! Four iterations are provided:
//!
//! - **New Q-Newton Backtracking SE**: the curvature matrix of `f` is shifted
//!   by `δ_j ||F||` or `δ_j ||F||^τ` until its smallest absolute eigenvalue
//!   clears a floor, negative eigendirections of the Newton step are
//!   reflected, and the step is chosen by Armijo backtracking.
//! - **Levenberg-Marquardt Backtracking M**: `HᵀH + δ ||F||^τ` with the same
//!   normalised direction and backtracking.
//! - **General second-order scheme**: direction weighted by q-norms of the
//!   rows of the regularised matrix in an orthonormal basis.
//! - **Newton baseline**: plain `x - JF(x)⁻¹ F(x)` for comparison.
//!
//! The [`diagnostics`] module holds the experiment drivers used to check
//! descent, convergence order, saddle avoidance and basins of attraction.

pub mod cli;
pub mod diagnostics;
mod error;
pub mod problem;
pub mod solvers;
pub mod spectral;

pub use error::{Error, Result};
pub use problem::{DerivativeMode, Problem, StepRule};
pub use solvers::{
    solve, Branch, DeltaLadder, LineSearch, Method, RunResult, SolverConfig, Termination,
    TraceRecord,
};
pub use spectral::{SpectralDecomposition, SymMatrix};
