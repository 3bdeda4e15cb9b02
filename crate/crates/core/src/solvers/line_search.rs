//! Armijo backtracking on the grid `{1, r, r², …}`.
//!
//! The sufficient-decrease test is
//! `f(x - γŵ) - f(x) ≤ -γ ⟨ŵ, HᵀF⟩`, i.e. an Armijo constant of 1/2
//! relative to `∇f = 2HᵀF`.

use nalgebra::DVector;

use crate::problem::{DerivativeMode, Problem};
use crate::{Error, Result};

/// Keeps iterates where `|det JF(x)| > epsilon`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetGuard {
    pub epsilon: f64,
    pub mode: DerivativeMode,
}

impl DetGuard {
    pub fn admits(&self, problem: &Problem, x: &DVector<f64>) -> bool {
        match problem.jacobian_determinant(x, self.mode) {
            Ok(det) => det.abs() > self.epsilon,
            Err(_) => false,
        }
    }
}

/// `f` at a trial point, with evaluation failures mapped to `+∞` so they are
/// rejected like any other insufficient decrease.
fn trial_f(problem: &Problem, x: &DVector<f64>) -> f64 {
    problem.eval_f(x).unwrap_or(f64::INFINITY)
}

/// Whether `γ` satisfies the Armijo inequality.
pub fn armijo_accepts(
    problem: &Problem,
    x: &DVector<f64>,
    f_x: f64,
    w_hat: &DVector<f64>,
    slope: f64,
    gamma: f64,
) -> bool {
    let trial = x - w_hat * gamma;
    trial_f(problem, &trial) - f_x <= -gamma * slope
}

/// Largest `γ ∈ {1, r, r², …}`, `γ ≥ gamma_min`, satisfying the Armijo test
/// (and the determinant guard, if any).
pub(crate) fn backtrack(
    problem: &Problem,
    x: &DVector<f64>,
    f_x: f64,
    w_hat: &DVector<f64>,
    grad_half: &DVector<f64>,
    ratio: f64,
    gamma_min: f64,
    guard: Option<&DetGuard>,
) -> Result<f64> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidInput(format!("backtracking ratio must lie in (0, 1), got {ratio}")));
    }
    let slope = w_hat.dot(grad_half);
    if grad_half.iter().all(|g| *g == 0.0) {
        return Ok(1.0);
    }
    if !(slope > 0.0) {
        return Err(Error::InvalidInput(format!(
            "not a descent direction: <ŵ, HᵀF> = {slope:e}"
        )));
    }
    let mut gamma = 1.0;
    while gamma >= gamma_min {
        if armijo_accepts(problem, x, f_x, w_hat, slope, gamma)
            && guard.map_or(true, |g| g.admits(problem, &(x - w_hat * gamma)))
        {
            return Ok(gamma);
        }
        gamma *= ratio;
    }
    Err(Error::LineSearchStalled { gamma_min })
}

/// Armijo backtracking by halving.
pub fn armijo_halving(
    problem: &Problem,
    x: &DVector<f64>,
    w_hat: &DVector<f64>,
    grad_half: &DVector<f64>,
    gamma_min: f64,
) -> Result<f64> {
    let f_x = problem.eval_f(x)?;
    backtrack(problem, x, f_x, w_hat, grad_half, 0.5, gamma_min, None)
}

/// Armijo backtracking over `{βⁿ}`.
pub fn armijo_beta_grid(
    problem: &Problem,
    x: &DVector<f64>,
    w_hat: &DVector<f64>,
    grad_half: &DVector<f64>,
    beta: f64,
    gamma_min: f64,
) -> Result<f64> {
    let f_x = problem.eval_f(x)?;
    backtrack(problem, x, f_x, w_hat, grad_half, beta, gamma_min, None)
}

/// Armijo search on the grid `{ratioⁿ}` that also requires
/// `|det JF(x - γŵ)| > epsilon`.
pub fn det_guard_search(
    problem: &Problem,
    x: &DVector<f64>,
    w_hat: &DVector<f64>,
    grad_half: &DVector<f64>,
    guard: &DetGuard,
    ratio: f64,
    gamma_min: f64,
) -> Result<f64> {
    if !problem.is_square() {
        return Err(Error::InvalidInput("determinant guard needs a square system".into()));
    }
    let f_x = problem.eval_f(x)?;
    backtrack(problem, x, f_x, w_hat, grad_half, ratio, gamma_min, Some(guard))
}

/// Outcome of a step-size search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepChoice {
    /// The full unclamped step `x - w` passed the residual-contraction gate.
    Gated,
    /// `x - γŵ` from the backtracking search.
    Backtracked(f64),
}

/// `||F(x - w)|| ≤ η ||F(x)||` for the unclamped direction `w`.
pub fn eta_gate_passes(problem: &Problem, x: &DVector<f64>, w: &DVector<f64>, eta: f64) -> Result<bool> {
    let norm_f = problem.residual(x)?.norm();
    Ok(match problem.residual(&(x - w)) {
        Ok(r) => r.norm() <= eta * norm_f,
        Err(_) => false,
    })
}

/// Takes the unclamped step when it contracts the residual by `η`, otherwise
/// defers to `inner`.
pub fn hybrid_eta_gate<S>(
    problem: &Problem,
    x: &DVector<f64>,
    w: &DVector<f64>,
    eta: f64,
    inner: S,
) -> Result<StepChoice>
where
    S: FnOnce() -> Result<f64>,
{
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidInput(format!("eta must lie in (0, 1), got {eta}")));
    }
    if eta_gate_passes(problem, x, w, eta)? {
        Ok(StepChoice::Gated)
    } else {
        inner().map(StepChoice::Backtracked)
    }
}
