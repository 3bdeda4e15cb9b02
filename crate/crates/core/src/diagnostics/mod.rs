//! Checks run after (or around) solver runs.

mod basin;
mod invariants;

use std::collections::BTreeMap;

use nalgebra::DVector;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::problem::{DerivativeMode, Problem};
use crate::solvers::{self, line_search, SolverConfig};
use crate::spectral::{eigh, SymMatrix};
use crate::{Error, Result};

pub use basin::{basin_grid, BasinGrid, Rect, ROOT_MATCH_RADIUS};
pub use invariants::{audit_run, criticality_bound, random_starts, DESCENT_SLACK};

/// Only errors inside this window enter the order fit.
pub const ORDER_WINDOW: (f64, f64) = (1e-13, 1e-2);

/// A run "ended at the saddle" when its final point is this close to it.
pub const AT_CENTER_RADIUS: f64 = 1e-4;

/// Least-squares slope of `log e_{k+1}` against `log e_k`.
///
/// Only the longest strictly decreasing tail of `errors` is used, and from it
/// only the pairs with `e_k` in `(1e-13, 1e-2)` and `e_{k+1} > 0`. At least
/// two such pairs are needed.
pub fn estimate_order(errors: &[f64]) -> Result<f64> {
    if errors.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "need at least 4 errors, got {}",
            errors.len()
        )));
    }
    let mut start = errors.len() - 1;
    while start > 0 && errors[start - 1] > errors[start] {
        start -= 1;
    }
    let (lo, hi) = ORDER_WINDOW;
    let pairs: Vec<(f64, f64)> = errors[start..]
        .windows(2)
        .filter(|w| w[0] > lo && w[0] < hi && w[1] > 0.0)
        .map(|w| (w[0].ln(), w[1].ln()))
        .collect();
    if pairs.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} usable error pairs in the tail, need 2",
            pairs.len()
        )));
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pairs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("errors do not vary".into()));
    }
    Ok(sxy / sxx)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum LimitClass {
    RootNonDegenerate,
    RootDegenerate,
    /// `Σ Fᵢ∇²Fᵢ` negative definite and `∇²f` has a negative eigenvalue.
    SaddleStrong,
    /// `∇²f` has a negative eigenvalue.
    SaddleGeneralized,
    /// `∇²f` positive definite at a non-root.
    LocalMinNonRoot,
    Unclassified,
}

impl LimitClass {
    pub fn is_root(&self) -> bool {
        matches!(self, LimitClass::RootNonDegenerate | LimitClass::RootDegenerate)
    }

    pub fn is_saddle(&self) -> bool {
        matches!(self, LimitClass::SaddleStrong | LimitClass::SaddleGeneralized)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyTolerances {
    pub tol_root: f64,
    /// Bound on `||∇f||` for `x` to count as critical.
    pub tol_crit: f64,
    /// Eigenvalue tolerance.
    pub tol_eig: f64,
}

impl Default for ClassifyTolerances {
    fn default() -> Self {
        ClassifyTolerances {
            tol_root: 1e-10,
            tol_crit: 1e-8,
            tol_eig: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitReport {
    pub class: LimitClass,
    pub norm_f: f64,
    /// Smallest singular value of `JF` (`minsp` for square systems).
    pub min_singular_jacobian: f64,
    pub hess_min: f64,
    pub hess_max: f64,
    /// Extreme eigenvalues of `Σ Fᵢ∇²Fᵢ`.
    pub weighted_min: f64,
    pub weighted_max: f64,
}

/// Classifies an approximately critical point of `f`.
pub fn classify_limit(problem: &Problem, x: &DVector<f64>, tols: &ClassifyTolerances) -> Result<LimitReport> {
    let mode = hessian_mode(problem);
    let grad_norm = problem.grad_f(x)?.norm();
    if grad_norm > tols.tol_crit {
        return Err(Error::NotCritical {
            grad_norm,
            tol: tols.tol_crit,
        });
    }
    let residual = problem.residual(x)?;
    let norm_f = residual.norm();
    let jacobian = problem.jacobian(x, DerivativeMode::Analytic)?;
    let min_singular_jacobian = if problem.is_square() {
        let j = SymMatrix::gram(&jacobian);
        eigh(&j)?.min_eigenvalue().max(0.0).sqrt()
    } else {
        jacobian.singular_values().min()
    };
    let hess = eigh(&problem.hess_f(x, mode)?)?;
    let weighted_matrix = match mode {
        DerivativeMode::Analytic => problem.weighted_component_hessian(x)?,
        _ => problem
            .half_hessian(x, mode)?
            .add(&SymMatrix::gram(&jacobian).scaled(-1.0))?,
    };
    let weighted = eigh(&weighted_matrix)?;
    let mut report = LimitReport {
        class: LimitClass::Unclassified,
        norm_f,
        min_singular_jacobian,
        hess_min: hess.min_eigenvalue(),
        hess_max: hess.max_eigenvalue(),
        weighted_min: weighted.min_eigenvalue(),
        weighted_max: weighted.max_eigenvalue(),
    };
    let strong_tol = 1e-8 * weighted_matrix.frobenius_norm().max(1.0);
    report.class = if norm_f <= tols.tol_root {
        if min_singular_jacobian > tols.tol_eig {
            LimitClass::RootNonDegenerate
        } else {
            LimitClass::RootDegenerate
        }
    } else if report.hess_min < -tols.tol_eig {
        if report.weighted_max < -strong_tol {
            LimitClass::SaddleStrong
        } else {
            LimitClass::SaddleGeneralized
        }
    } else if report.hess_min > tols.tol_eig {
        LimitClass::LocalMinNonRoot
    } else {
        LimitClass::Unclassified
    };
    Ok(report)
}

fn hessian_mode(problem: &Problem) -> DerivativeMode {
    if problem.has_component_hessians() {
        DerivativeMode::Analytic
    } else {
        DerivativeMode::CentralDifference(crate::problem::StepRule::Scaled)
    }
}

/// Uniform point of the closed ball, by rejection from the cube.
fn sample_ball<R: Rng>(center: &DVector<f64>, radius: f64, rng: &mut R) -> DVector<f64> {
    if radius == 0.0 {
        return center.clone();
    }
    loop {
        let u = DVector::from_fn(center.len(), |_, _| rng.random_range(-1.0..=1.0));
        if u.norm() <= 1.0 {
            return center + u * radius;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EscapeSummary {
    pub trials: usize,
    /// Runs that did not end within [`AT_CENTER_RADIUS`] of the center.
    pub escapes: usize,
    pub at_center: usize,
    /// Runs that ended within `1e-6` of one of the problem's known roots.
    pub reached_root: usize,
    pub terminations: BTreeMap<String, usize>,
    pub limits: BTreeMap<String, usize>,
    pub seed: u64,
}

/// Runs `trials` solves from uniform starts in the ball around `center`.
///
/// Each trial gets its own seed, drawn from `template.rng_seed`, so a
/// template without fixed deltas gets a fresh ladder per trial.
pub fn saddle_escape_mc(
    problem: &Problem,
    center: &DVector<f64>,
    radius: f64,
    trials: usize,
    template: &SolverConfig,
) -> Result<EscapeSummary> {
    if trials == 0 {
        return Err(Error::InvalidInput("trials must be at least 1".into()));
    }
    if !(radius >= 0.0 && radius.is_finite()) {
        return Err(Error::InvalidInput(format!("radius must be non-negative, got {radius}")));
    }
    if center.len() != problem.domain_dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.domain_dim(),
            got: center.len(),
        });
    }
    template.validate(problem)?;
    let mut rng = ChaCha8Rng::seed_from_u64(template.rng_seed);
    let mut summary = EscapeSummary {
        trials,
        escapes: 0,
        at_center: 0,
        reached_root: 0,
        terminations: BTreeMap::new(),
        limits: BTreeMap::new(),
        seed: template.rng_seed,
    };
    let tols = ClassifyTolerances {
        tol_root: template.tol_root,
        tol_crit: 2.0 * template.tol_crit,
        ..Default::default()
    };
    for _ in 0..trials {
        let x0 = sample_ball(center, radius, &mut rng);
        let config = SolverConfig {
            rng_seed: rng.next_u64(),
            ..template.clone()
        };
        let run = match solvers::solve(problem, &config, &x0) {
            Ok(run) => run,
            Err(e) => {
                *summary.terminations.entry(format!("Error: {e}")).or_default() += 1;
                summary.escapes += 1;
                continue;
            }
        };
        *summary.terminations.entry(run.termination.as_str().to_string()).or_default() += 1;
        let xf = run.final_point();
        if (&xf - center).norm() <= AT_CENTER_RADIUS {
            summary.at_center += 1;
        } else {
            summary.escapes += 1;
        }
        if problem.known_roots().iter().any(|r| (&xf - r).norm() <= 1e-6) {
            summary.reached_root += 1;
        }
        let label = match classify_limit(problem, &xf, &tols) {
            Ok(report) => format!("{:?}", report.class),
            Err(_) => "NotCritical".to_string(),
        };
        *summary.limits.entry(label).or_default() += 1;
    }
    Ok(summary)
}

/// Fraction of sampled points near `x_star` at which the configured
/// method's direction passes the Armijo test with `γ = 1`.
///
/// `x_star` must be a critical non-root. Sample points with
/// `||HᵀF|| ≤ tol_crit` are skipped.
pub fn gamma_one_region_check(
    problem: &Problem,
    x_star: &DVector<f64>,
    radius: f64,
    samples: usize,
    config: &SolverConfig,
) -> Result<f64> {
    let grad_norm = problem.grad_half(x_star, config.derivatives)?.norm();
    if grad_norm > config.tol_crit {
        return Err(Error::NotCritical {
            grad_norm,
            tol: config.tol_crit,
        });
    }
    let norm_f = problem.residual(x_star)?.norm();
    if norm_f <= config.tol_root {
        return Err(Error::InvalidInput(format!(
            "expected a critical non-root, but ||F|| = {norm_f:e}"
        )));
    }
    let resolved = config.resolve(problem)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut tried = 0usize;
    let mut accepted = 0usize;
    for _ in 0..samples {
        let x = sample_ball(x_star, radius, &mut rng);
        let g = problem.grad_half(&x, config.derivatives)?;
        if g.norm() <= config.tol_crit {
            continue;
        }
        let proposal = solvers::propose(problem, &resolved, &x)?;
        tried += 1;
        let f_x = problem.eval_f(&x)?;
        if line_search::armijo_accepts(problem, &x, f_x, &proposal.direction.w_hat, proposal.direction.w_hat.dot(&g), 1.0) {
            accepted += 1;
        }
    }
    if tried == 0 {
        return Err(Error::InsufficientData("no sample left after excluding critical points".into()));
    }
    Ok(accepted as f64 / tried as f64)
}

/// `m^{1/p} < 4/3` for the Hölder conjugate `p = q / (q - 1)`.
pub fn holder_conjugate_ok(q: f64, m: usize) -> bool {
    if q <= 1.0 {
        return true;
    }
    let inv_p = (q - 1.0) / q;
    (m as f64).powf(inv_p) < 4.0 / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::corpus::{cubic2d, quad1d, saddle1d};
    use crate::solvers::Method;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn order_of_doubling_sequence() {
        let e: Vec<f64> = (0..5).map(|k| 10f64.powi(-(1 << k))).collect();
        assert!((estimate_order(&e).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn order_of_linear_sequence() {
        let e: Vec<f64> = (0..60).map(|k| 2f64.powi(-k)).collect();
        assert!((estimate_order(&e).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn order_needs_data() {
        assert!(matches!(estimate_order(&[1.0, 0.5, 0.25]), Err(Error::InsufficientData(_))));
        assert!(matches!(estimate_order(&[1.0, 0.5, 0.25, 0.125]), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn order_ignores_leading_increase() {
        let mut e = vec![1e-3, 5.0];
        e.extend((0..5).map(|k| 10f64.powi(-(1 << k))));
        assert!((estimate_order(&e).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn quad1d_run_is_quadratic() {
        let p = quad1d();
        let run = solvers::solve(&p, &SolverConfig::default(), &v(&[2.0])).unwrap();
        let root = 2f64.sqrt();
        let errors: Vec<f64> = run.trace.iter().map(|r| (r.x[0] - root).abs()).collect();
        let order = estimate_order(&errors).unwrap();
        assert!((1.7..=2.3).contains(&order), "order {order}");
    }

    #[test]
    fn classify_examples() {
        let t = ClassifyTolerances::default();
        let r = classify_limit(&saddle1d(), &v(&[0.0]), &t).unwrap();
        assert_eq!(r.class, LimitClass::SaddleStrong);
        assert_eq!(r.hess_min, -4.0);
        assert_eq!(r.weighted_max, -2.0);

        let r = classify_limit(&quad1d(), &v(&[2f64.sqrt()]), &t).unwrap();
        assert_eq!(r.class, LimitClass::RootNonDegenerate);

        let square = Problem::new("sq", 1, 1, |x| v(&[x[0] * x[0]]))
            .with_jacobian(|x| DMatrix::from_element(1, 1, 2.0 * x[0]))
            .with_component_hessians(|_| vec![SymMatrix::from_diagonal(&[2.0])]);
        assert_eq!(classify_limit(&square, &v(&[0.0]), &t).unwrap().class, LimitClass::RootDegenerate);

        // x² + 1 has a non-root minimum at 0
        let lifted = Problem::new("lift", 1, 1, |x| v(&[x[0] * x[0] + 1.0]))
            .with_jacobian(|x| DMatrix::from_element(1, 1, 2.0 * x[0]))
            .with_component_hessians(|_| vec![SymMatrix::from_diagonal(&[2.0])]);
        assert_eq!(classify_limit(&lifted, &v(&[0.0]), &t).unwrap().class, LimitClass::LocalMinNonRoot);

        // origin of z³ - 1: f has a flat critical point there
        assert_eq!(classify_limit(&cubic2d(), &v(&[0.0, 0.0]), &t).unwrap().class, LimitClass::Unclassified);

        assert!(matches!(classify_limit(&quad1d(), &v(&[2.0]), &t), Err(Error::NotCritical { .. })));
    }

    #[test]
    fn generalized_but_not_strong_saddle() {
        // F = (x² - y² - 1, y): at the origin ∇²f has mixed signs and
        // Σ Fᵢ∇²Fᵢ = diag(-2, 2) is indefinite
        let p = Problem::new("mix", 2, 2, |p| v(&[p[0] * p[0] - p[1] * p[1] - 1.0, p[1]]))
            .with_jacobian(|p| DMatrix::from_row_slice(2, 2, &[2.0 * p[0], -2.0 * p[1], 0.0, 1.0]))
            .with_component_hessians(|_| vec![SymMatrix::from_diagonal(&[2.0, -2.0]), SymMatrix::zeros(2)]);
        // HᵀH = diag(0, 1), so ∇²f = 2·diag(-2, 3)
        let r = classify_limit(&p, &v(&[0.0, 0.0]), &ClassifyTolerances::default()).unwrap();
        assert_eq!(r.class, LimitClass::SaddleGeneralized);
        assert_eq!((r.hess_min, r.hess_max), (-4.0, 6.0));
    }

    #[test]
    fn holder_examples() {
        assert!(holder_conjugate_ok(1.0, 1));
        assert!(holder_conjugate_ok(1.0, 100));
        assert!(!holder_conjugate_ok(2.0, 2));
        assert!(holder_conjugate_ok(2.0, 1));
    }

    #[test]
    fn escape_from_root_start() {
        let r = 2f64.sqrt();
        let s = saddle_escape_mc(&quad1d(), &v(&[r]), 0.0, 1, &SolverConfig::default()).unwrap();
        assert_eq!(s.terminations.get("RootFound"), Some(&1));
        assert_eq!(s.terminations.len(), 1);
        assert_eq!(s.reached_root, 1);
        assert_eq!(s.at_center, 1);
    }

    #[test]
    fn escape_small_run_is_seeded() {
        let cfg = SolverConfig { rng_seed: 5, ..Default::default() };
        let a = saddle_escape_mc(&saddle1d(), &v(&[0.0]), 0.05, 10, &cfg).unwrap();
        let b = saddle_escape_mc(&saddle1d(), &v(&[0.0]), 0.05, 10, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.escapes + a.at_center, 10);
    }

    #[test]
    fn gamma_one_near_saddle_for_lmm() {
        let cfg = SolverConfig::with_method(Method::LmM);
        let frac = gamma_one_region_check(&saddle1d(), &v(&[0.0]), 1e-3, 50, &cfg).unwrap();
        assert_eq!(frac, 1.0);
    }

    #[test]
    fn gamma_one_needs_samples_and_critical_point() {
        let cfg = SolverConfig::with_method(Method::LmM);
        assert!(matches!(
            gamma_one_region_check(&saddle1d(), &v(&[0.0]), 0.0, 10, &cfg),
            Err(Error::InsufficientData(_))
        ));
        assert!(matches!(
            gamma_one_region_check(&saddle1d(), &v(&[0.5]), 1e-3, 10, &cfg),
            Err(Error::NotCritical { .. })
        ));
    }

    proptest! {
        #[test]
        fn order_recovers_power_law(p in prop::sample::select(vec![1.0, 1.5, 2.0]),
                                    c in prop::sample::select(vec![0.5, 1.0]),
                                    e0 in 1e-3f64..9e-3) {
            // c = 1, p = 1 is a constant sequence with no rate to recover
            prop_assume!(!(p == 1.0 && c == 1.0));
            let mut e = vec![e0];
            while e.len() < 80 && *e.last().unwrap() > 1e-14 {
                let last = *e.last().unwrap();
                e.push(c * last.powf(p));
            }
            let order = estimate_order(&e).unwrap();
            prop_assert!((order - p).abs() <= 0.05, "p {p} c {c} got {order}");
        }

        #[test]
        fn classification_is_stable(dx in -1e-12f64..1e-12) {
            let t = ClassifyTolerances::default();
            let r = 2f64.sqrt();
            prop_assert_eq!(classify_limit(&saddle1d(), &v(&[dx]), &t).unwrap().class, LimitClass::SaddleStrong);
            prop_assert_eq!(classify_limit(&quad1d(), &v(&[r + dx]), &t).unwrap().class, LimitClass::RootNonDegenerate);
        }
    }
}
