//! The iteration driver and its building blocks.

pub mod direction;
pub mod line_search;
pub mod regularize;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diagnostics::estimate_order;
use crate::problem::{DerivativeMode, Problem, StepRule};
use crate::spectral::SymMatrix;
use crate::{Error, Result};

pub use direction::{direction_general, direction_lmm, direction_nqnse, Direction};
pub use line_search::{
    armijo_beta_grid, armijo_halving, det_guard_search, hybrid_eta_gate, DetGuard, StepChoice,
};
pub use regularize::{regularize_lmm, regularize_nqnse, Branch, Regularized};

/// Smallest allowed gap between two ladder entries.
pub const MIN_DELTA_GAP: f64 = 1e-3;
/// Range of randomly drawn deltas.
pub const RANDOM_DELTA_RANGE: (f64, f64) = (1.0, 2.0);
/// A point with `||HᵀF|| ≤ tol_crit` only counts as a critical non-root if
/// also `||HᵀF|| ≤ CRITICAL_RATIO·||F||`. Near a non-degenerate root
/// `||HᵀF||` shrinks like `||F||`, so without this a run closing in on a root
/// would be stopped before `||F||` reaches `tol_root`.
pub const CRITICAL_RATIO: f64 = 1e-4;
/// Range of a randomly drawn backtracking ratio β.
pub const RANDOM_BETA_RANGE: (f64, f64) = (0.1, 0.9);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    /// New Q-Newton's method Backtracking SE.
    NqnSe,
    /// Levenberg-Marquardt Backtracking M.
    LmM,
    /// The general second-order scheme with q-norm weights.
    General,
    /// Plain Newton on `F`, no line search.
    NewtonBaseline,
}

impl Method {
    pub fn cli_name(&self) -> &'static str {
        match self {
            Method::NqnSe => "nqn-se",
            Method::LmM => "lm-m",
            Method::General => "general",
            Method::NewtonBaseline => "newton",
        }
    }
}

/// Orthonormal basis used by [`Method::General`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Basis {
    Standard,
    /// Eigenvectors of the regularised matrix.
    EigenOfA,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LineSearch {
    Halving,
    /// Grid `{βⁿ}`; `None` draws β once per run from the seeded RNG.
    BetaGrid(Option<f64>),
    /// Full unclamped step when `||F(x - w)|| ≤ η ||F(x)||`, else `inner`.
    Hybrid { eta: f64, inner: Box<LineSearch> },
}

impl LineSearch {
    fn grid_beta(&self) -> Option<Option<f64>> {
        match self {
            LineSearch::Halving => None,
            LineSearch::BetaGrid(b) => Some(*b),
            LineSearch::Hybrid { inner, .. } => inner.grid_beta(),
        }
    }

    fn validate(&self, nested: bool) -> Result<()> {
        match self {
            LineSearch::Halving => Ok(()),
            LineSearch::BetaGrid(Some(b)) if !(*b > 0.0 && *b < 1.0) => Err(Error::InvalidConfig {
                field: "beta",
                reason: format!("must lie in (0, 1), got {b}"),
            }),
            LineSearch::BetaGrid(_) => Ok(()),
            LineSearch::Hybrid { .. } if nested => Err(Error::InvalidConfig {
                field: "line_search",
                reason: "hybrid search cannot wrap another hybrid search".into(),
            }),
            LineSearch::Hybrid { eta, inner } => {
                if !(*eta > 0.0 && *eta < 1.0) {
                    return Err(Error::InvalidConfig {
                        field: "eta",
                        reason: format!("must lie in (0, 1), got {eta}"),
                    });
                }
                inner.validate(true)
            }
        }
    }
}

/// Pairwise distinct positive shifts `δ₀, δ₁, …` tried in order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaLadder {
    values: Vec<f64>,
    kappa: f64,
}

impl DeltaLadder {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidConfig {
                field: "deltas",
                reason: format!("need at least two deltas, got {}", values.len()),
            });
        }
        if let Some(bad) = values.iter().find(|d| !(**d > 0.0 && d.is_finite())) {
            return Err(Error::InvalidConfig {
                field: "deltas",
                reason: format!("deltas must be positive and finite, got {bad}"),
            });
        }
        let mut min_gap = f64::INFINITY;
        for (i, a) in values.iter().enumerate() {
            for b in &values[i + 1..] {
                min_gap = min_gap.min((a - b).abs());
            }
        }
        if min_gap < MIN_DELTA_GAP {
            return Err(Error::InvalidConfig {
                field: "deltas",
                reason: format!("pairwise gaps must be at least {MIN_DELTA_GAP}, smallest is {min_gap:e}"),
            });
        }
        Ok(DeltaLadder {
            values,
            kappa: 0.5 * min_gap,
        })
    }

    /// I.i.d. uniform draws from [`RANDOM_DELTA_RANGE`], redrawn until every
    /// pairwise gap is at least [`MIN_DELTA_GAP`].
    pub fn random<R: Rng>(len: usize, rng: &mut R) -> Self {
        let (lo, hi) = RANDOM_DELTA_RANGE;
        loop {
            let values: Vec<f64> = (0..len).map(|_| rng.random_range(lo..hi)).collect();
            if let Ok(ladder) = DeltaLadder::new(values) {
                return ladder;
            }
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Half the smallest pairwise gap.
    pub fn kappa(&self) -> f64 {
        self.kappa
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub method: Method,
    /// Fixed ladder, or `None` to draw one from the seeded RNG.
    pub deltas: Option<Vec<f64>>,
    pub tau: f64,
    /// Accept `τ ≥ 1`.
    pub allow_large_tau: bool,
    pub line_search: LineSearch,
    pub det_guard: Option<f64>,
    /// Exponent of the row norms in the general scheme.
    pub q: f64,
    pub basis: Basis,
    pub tol_root: f64,
    pub tol_crit: f64,
    pub max_iter: usize,
    pub gamma_min: f64,
    pub divergence_radius: f64,
    pub rng_seed: u64,
    pub derivatives: DerivativeMode,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            method: Method::NqnSe,
            deltas: None,
            tau: 0.5,
            allow_large_tau: false,
            line_search: LineSearch::Halving,
            det_guard: None,
            q: 1.0,
            basis: Basis::Standard,
            tol_root: 1e-10,
            tol_crit: 1e-8,
            max_iter: 10_000,
            gamma_min: 2f64.powi(-60),
            divergence_radius: 1e8,
            rng_seed: 0,
            derivatives: DerivativeMode::Analytic,
        }
    }
}

impl SolverConfig {
    pub fn with_method(method: Method) -> Self {
        SolverConfig {
            method,
            ..Default::default()
        }
    }

    /// Ladder length the method needs for a problem of dimension `m`.
    pub fn ladder_len(&self, m: usize) -> usize {
        match self.method {
            Method::LmM => 2,
            _ => m + 1,
        }
    }

    pub fn validate(&self, problem: &Problem) -> Result<()> {
        let positive = |field: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidConfig {
                    field,
                    reason: format!("must be positive and finite, got {v}"),
                })
            }
        };
        positive("tau", self.tau)?;
        if self.tau >= 1.0 && !self.allow_large_tau {
            return Err(Error::InvalidConfig {
                field: "tau",
                reason: format!("must lie in (0, 1), got {} (set the large-tau override to allow it)", self.tau),
            });
        }
        positive("tol_root", self.tol_root)?;
        positive("tol_crit", self.tol_crit)?;
        positive("gamma_min", self.gamma_min)?;
        positive("divergence_radius", self.divergence_radius)?;
        if self.gamma_min > 1.0 {
            return Err(Error::InvalidConfig {
                field: "gamma_min",
                reason: "must not exceed 1".into(),
            });
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig {
                field: "max_iter",
                reason: "must be positive".into(),
            });
        }
        if !(self.q >= 1.0 && self.q.is_finite()) {
            return Err(Error::InvalidConfig {
                field: "q",
                reason: format!("must be a finite real ≥ 1, got {}", self.q),
            });
        }
        if let DerivativeMode::CentralDifference(StepRule::Fixed(h)) = self.derivatives {
            positive("derivatives", h)?;
        }
        self.line_search.validate(false)?;
        if let Some(eps) = self.det_guard {
            if !(eps >= 0.0 && eps.is_finite()) {
                return Err(Error::InvalidConfig {
                    field: "det_guard",
                    reason: format!("must be a non-negative finite real, got {eps}"),
                });
            }
            if !problem.is_square() {
                return Err(Error::InvalidConfig {
                    field: "det_guard",
                    reason: format!(
                        "determinant undefined for `{}` ({} equations, {} unknowns)",
                        problem.name(),
                        problem.codomain_dim(),
                        problem.domain_dim()
                    ),
                });
            }
            if self.method == Method::NewtonBaseline {
                return Err(Error::InvalidConfig {
                    field: "det_guard",
                    reason: "the Newton baseline has no line search to guard".into(),
                });
            }
        }
        if self.method == Method::NewtonBaseline && !problem.is_square() {
            return Err(Error::InvalidConfig {
                field: "method",
                reason: format!("Newton baseline needs a square system, `{}` is not", problem.name()),
            });
        }
        if let Some(values) = &self.deltas {
            let ladder = DeltaLadder::new(values.clone())?;
            let needed = self.ladder_len(problem.domain_dim());
            let ok = match self.method {
                Method::LmM => ladder.len() == 2,
                Method::NewtonBaseline => true,
                _ => ladder.len() >= needed,
            };
            if !ok {
                return Err(Error::InvalidConfig {
                    field: "deltas",
                    reason: match self.method {
                        Method::LmM => format!("Levenberg-Marquardt M takes exactly 2 deltas, got {}", ladder.len()),
                        _ => format!("need at least {needed} deltas for dimension {}, got {}", problem.domain_dim(), ladder.len()),
                    },
                });
            }
        }
        Ok(())
    }

    /// Fixes the run's random choices (ladder, β) from `rng_seed`.
    pub fn resolve(&self, problem: &Problem) -> Result<ResolvedConfig> {
        self.validate(problem)?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.rng_seed);
        let len = self.ladder_len(problem.domain_dim());
        let ladder = match &self.deltas {
            Some(values) => DeltaLadder::new(values.clone())?,
            None => DeltaLadder::random(len, &mut rng),
        };
        let beta = match self.line_search.grid_beta() {
            None => 0.5,
            Some(Some(b)) => b,
            Some(None) => rng.random_range(RANDOM_BETA_RANGE.0..RANDOM_BETA_RANGE.1),
        };
        let eta = match &self.line_search {
            LineSearch::Hybrid { eta, .. } => Some(*eta),
            _ => None,
        };
        let hessian_mode = if problem.has_component_hessians() {
            self.derivatives
        } else {
            match self.derivatives {
                DerivativeMode::Analytic => DerivativeMode::CentralDifference(StepRule::Scaled),
                other => other,
            }
        };
        Ok(ResolvedConfig {
            config: self.clone(),
            ladder,
            beta,
            eta,
            hessian_mode,
        })
    }
}

/// A validated configuration with its random choices drawn.
#[derive(Debug, Clone)]
pub struct ResolvedConfig {
    pub config: SolverConfig,
    pub ladder: DeltaLadder,
    /// Backtracking ratio (0.5 for halving).
    pub beta: f64,
    pub eta: Option<f64>,
    /// Derivative mode for the curvature matrix; differences when the
    /// problem has no component Hessians.
    pub hessian_mode: DerivativeMode,
}

impl ResolvedConfig {
    fn det_guard(&self) -> Option<DetGuard> {
        self.config.det_guard.map(|epsilon| DetGuard {
            epsilon,
            mode: self.config.derivatives,
        })
    }
}

/// Everything computed at `x` before the step size is chosen.
#[derive(Debug, Clone)]
pub struct Proposal {
    pub residual: DVector<f64>,
    pub jacobian: DMatrix<f64>,
    /// `HᵀF`.
    pub grad_half: DVector<f64>,
    pub direction: Direction,
    pub regularized: Option<Regularized>,
}

impl Proposal {
    pub fn norm_f(&self) -> f64 {
        self.residual.norm()
    }
}

/// `F`, `H` and `HᵀF` at `x`.
fn local_data(problem: &Problem, x: &DVector<f64>, mode: DerivativeMode) -> Result<(DVector<f64>, DMatrix<f64>, DVector<f64>)> {
    let residual = problem.residual(x)?;
    let jacobian = problem.jacobian(x, mode)?;
    let grad_half = jacobian.tr_mul(&residual);
    Ok((residual, jacobian, grad_half))
}

/// Builds the method's direction at `x` (requires `F(x) ≠ 0`).
///
/// The Newton-type methods use `∇²f / 2 = HᵀH + Σ Fᵢ∇²Fᵢ` as curvature so
/// that it is on the same scale as `HᵀF = ∇f / 2`.
pub fn propose(problem: &Problem, resolved: &ResolvedConfig, x: &DVector<f64>) -> Result<Proposal> {
    let cfg = &resolved.config;
    let (residual, jacobian, grad_half) = local_data(problem, x, cfg.derivatives)?;
    let norm_f = residual.norm();
    let (direction, regularized) = match cfg.method {
        Method::NqnSe => {
            let curvature = problem.half_hessian(x, resolved.hessian_mode)?;
            let reg = regularize_nqnse(&curvature, norm_f, &resolved.ladder, cfg.tau)?;
            let d = direction::direction_nqnse_from_spectrum(&reg.spectrum, &grad_half)?;
            (d, Some(reg))
        }
        Method::LmM => {
            let gram = SymMatrix::gram(&jacobian);
            let reg = regularize_lmm(&gram, norm_f, &resolved.ladder, cfg.tau)?;
            let d = direction_lmm(&reg.matrix, &grad_half)?;
            (d, Some(reg))
        }
        Method::General => {
            let curvature = problem.half_hessian(x, resolved.hessian_mode)?;
            let reg = regularize_nqnse(&curvature, norm_f, &resolved.ladder, cfg.tau)?;
            let basis = match cfg.basis {
                Basis::Standard => DMatrix::identity(problem.domain_dim(), problem.domain_dim()),
                Basis::EigenOfA => reg.spectrum.eigenvectors.clone(),
            };
            let d = direction_general(&reg.matrix, &grad_half, &basis, cfg.q)?;
            (d, Some(reg))
        }
        Method::NewtonBaseline => {
            let step = newton_step(&jacobian, &residual)?;
            (Direction { w: step.clone(), w_hat: step }, None)
        }
    };
    Ok(Proposal {
        residual,
        jacobian,
        grad_half,
        direction,
        regularized,
    })
}

fn newton_step(jacobian: &DMatrix<f64>, residual: &DVector<f64>) -> Result<DVector<f64>> {
    let step = jacobian
        .clone()
        .lu()
        .solve(residual)
        .ok_or(Error::SingularMatrix { min_abs_eigenvalue: 0.0 })?;
    if step.iter().all(|v| v.is_finite()) {
        Ok(step)
    } else {
        Err(Error::SingularMatrix { min_abs_eigenvalue: 0.0 })
    }
}

/// `x - JF(x)⁻¹ F(x)`.
pub fn newton_baseline_step(problem: &Problem, x: &DVector<f64>) -> Result<DVector<f64>> {
    if !problem.is_square() {
        return Err(Error::InvalidInput("Newton step needs a square system".into()));
    }
    let residual = problem.residual(x)?;
    let jacobian = problem.jacobian(x, DerivativeMode::Analytic)?;
    Ok(x - newton_step(&jacobian, &residual)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    RootFound,
    CriticalNonRoot,
    MaxIterations,
    Diverged,
    LineSearchStalled,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::RootFound => "RootFound",
            Termination::CriticalNonRoot => "CriticalNonRoot",
            Termination::MaxIterations => "MaxIterations",
            Termination::Diverged => "Diverged",
            Termination::LineSearchStalled => "LineSearchStalled",
        }
    }
}

/// State at iterate `k` and the step taken from it. The last record of a
/// run carries no step (`branch = None`, `gamma = 0`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    pub k: usize,
    pub x: Vec<f64>,
    pub f_val: f64,
    /// `||HᵀF||`.
    pub grad_half_norm: f64,
    pub delta_index: Option<usize>,
    pub branch: Branch,
    pub minsp_a: Option<f64>,
    /// `s` in `A = B + δ_j·s·Id`.
    pub scale: Option<f64>,
    pub gamma: f64,
    pub step_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult {
    pub trace: Vec<TraceRecord>,
    pub termination: Termination,
    pub final_x: Vec<f64>,
    /// Fitted order of convergence of `||F(x_k)||`, when the tail allows it.
    pub order_estimate: Option<f64>,
    pub deltas: Vec<f64>,
    pub kappa: f64,
    /// Backtracking ratio in effect (0.5 for halving).
    pub beta: f64,
    pub seed: u64,
}

impl RunResult {
    pub fn final_point(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.final_x)
    }

    /// Number of steps taken.
    pub fn steps(&self) -> usize {
        self.trace.len().saturating_sub(1)
    }
}

/// Runs the configured method from `x0`.
///
/// Before each step the run stops with `RootFound` if `||F|| ≤ tol_root`,
/// `CriticalNonRoot` if `||HᵀF|| ≤ tol_crit` (see [`CRITICAL_RATIO`]), `Diverged` if
/// `||x|| ≥ divergence_radius`, and `MaxIterations` once `max_iter` steps
/// have been taken.
pub fn solve(problem: &Problem, config: &SolverConfig, x0: &DVector<f64>) -> Result<RunResult> {
    let resolved = config.resolve(problem)?;
    solve_resolved(problem, &resolved, x0)
}

pub fn solve_resolved(problem: &Problem, resolved: &ResolvedConfig, x0: &DVector<f64>) -> Result<RunResult> {
    let cfg = &resolved.config;
    if x0.len() != problem.domain_dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.domain_dim(),
            got: x0.len(),
        });
    }
    let guard = resolved.det_guard();
    let mut trace = Vec::new();
    let mut x = x0.clone();
    let termination = loop {
        let k = trace.len();
        let (residual, _, grad_half) = match local_data(problem, &x, cfg.derivatives) {
            Ok(data) => data,
            Err(Error::EvaluationError { .. }) => break Termination::Diverged,
            Err(e) => return Err(e),
        };
        let norm_f = residual.norm();
        let mut record = TraceRecord {
            k,
            x: x.as_slice().to_vec(),
            f_val: residual.norm_squared(),
            grad_half_norm: grad_half.norm(),
            delta_index: None,
            branch: Branch::None,
            minsp_a: None,
            scale: None,
            gamma: 0.0,
            step_norm: 0.0,
        };
        let stop = if norm_f <= cfg.tol_root {
            Some(Termination::RootFound)
        } else if record.grad_half_norm <= cfg.tol_crit && record.grad_half_norm <= CRITICAL_RATIO * norm_f {
            Some(Termination::CriticalNonRoot)
        } else if x.norm() >= cfg.divergence_radius {
            Some(Termination::Diverged)
        } else if k >= cfg.max_iter {
            Some(Termination::MaxIterations)
        } else {
            None
        };
        if let Some(t) = stop {
            trace.push(record);
            break t;
        }

        let proposal = match propose(problem, resolved, &x) {
            Ok(p) => p,
            Err(Error::EvaluationError { .. }) => {
                trace.push(record);
                break Termination::Diverged;
            }
            Err(e) => return Err(e),
        };
        if let Some(reg) = &proposal.regularized {
            record.delta_index = Some(reg.delta_index);
            record.branch = reg.branch;
            record.minsp_a = Some(reg.minsp());
            record.scale = Some(reg.scale);
        }
        let dir = &proposal.direction;
        let step = if cfg.method == Method::NewtonBaseline {
            Ok(StepChoice::Gated)
        } else {
            let f_x = record.f_val;
            let grid = || {
                line_search::backtrack(
                    problem,
                    &x,
                    f_x,
                    &dir.w_hat,
                    &proposal.grad_half,
                    resolved.beta,
                    cfg.gamma_min,
                    guard.as_ref(),
                )
            };
            match resolved.eta {
                Some(eta) => {
                    let gate = line_search::eta_gate_passes(problem, &x, &dir.w, eta)?
                        && guard.as_ref().map_or(true, |g| g.admits(problem, &(&x - &dir.w)));
                    if gate {
                        Ok(StepChoice::Gated)
                    } else {
                        grid().map(StepChoice::Backtracked)
                    }
                }
                None => grid().map(StepChoice::Backtracked),
            }
        };
        let delta = match step {
            Ok(StepChoice::Gated) => {
                record.gamma = 1.0;
                dir.w.clone()
            }
            Ok(StepChoice::Backtracked(gamma)) => {
                record.gamma = gamma;
                &dir.w_hat * gamma
            }
            Err(Error::LineSearchStalled { .. }) => {
                trace.push(record);
                break Termination::LineSearchStalled;
            }
            Err(e) => return Err(e),
        };
        record.step_norm = delta.norm();
        trace.push(record);
        x -= delta;
    };
    let order_estimate = if termination == Termination::RootFound {
        let residuals: Vec<f64> = trace.iter().map(|r| r.f_val.sqrt()).collect();
        estimate_order(&residuals).ok()
    } else {
        None
    };
    Ok(RunResult {
        trace,
        termination,
        final_x: x.as_slice().to_vec(),
        order_estimate,
        deltas: resolved.ladder.values().to_vec(),
        kappa: resolved.ladder.kappa(),
        beta: resolved.beta,
        seed: cfg.rng_seed,
    })
}
