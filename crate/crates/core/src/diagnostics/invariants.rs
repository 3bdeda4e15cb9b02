use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::problem::Problem;
use crate::solvers::{self, line_search, Branch, Method, ResolvedConfig, RunResult, Termination};
use crate::Result;

/// Relative slack allowed in `f_{k+1} ≤ f_k`.
pub const DESCENT_SLACK: f64 = 1e-15;

/// Criticality bound on `||HᵀF||` at the end of a terminating run.
pub fn criticality_bound(tol_crit: f64) -> f64 {
    tol_crit.max(1e-6)
}

/// `count` starts uniform in the box `[-half_width, half_width]^m`.
pub fn random_starts(problem: &Problem, count: usize, half_width: f64, seed: u64) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| DVector::from_fn(problem.domain_dim(), |_, _| rng.random_range(-half_width..=half_width)))
        .collect()
}

/// Checks a finished run against the properties every run should have and
/// returns a description of each violation.
///
/// Directions are rebuilt from the trace, so this costs about as much as the
/// run itself.
pub fn audit_run(problem: &Problem, resolved: &ResolvedConfig, run: &RunResult) -> Result<Vec<String>> {
    let cfg = &resolved.config;
    let mut out = Vec::new();
    let kappa = resolved.ladder.kappa();
    let newton = cfg.method == Method::NewtonBaseline;
    let hybrid = matches!(cfg.line_search, solvers::LineSearch::Hybrid { .. });

    for pair in run.trace.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if !newton && b.f_val > a.f_val + DESCENT_SLACK * a.f_val.max(1.0) {
            out.push(format!("k={}: f rose from {:e} to {:e}", a.k, a.f_val, b.f_val));
        }
    }
    for rec in &run.trace {
        if rec.branch == Branch::None {
            continue;
        }
        let x = DVector::from_column_slice(&rec.x);
        let minsp = rec.minsp_a.unwrap_or(f64::NAN);
        let scale = rec.scale.unwrap_or(f64::NAN);
        match cfg.method {
            Method::NqnSe | Method::General if !(minsp >= kappa * scale) => {
                out.push(format!("k={}: minsp(A) = {minsp:e} below κ·s = {:e}", rec.k, kappa * scale));
            }
            Method::LmM if !(minsp > 0.0) => {
                out.push(format!("k={}: A not positive definite (minsp {minsp:e})", rec.k));
            }
            _ => {}
        }
        let proposal = solvers::propose(problem, resolved, &x)?;
        let w_hat = &proposal.direction.w_hat;
        let slope = w_hat.dot(&proposal.grad_half);
        if !newton {
            if w_hat.norm() > 1.0 + 1e-12 {
                out.push(format!("k={}: ||ŵ|| = {} exceeds 1", rec.k, w_hat.norm()));
            }
            if proposal.grad_half.norm() > 0.0 && !(slope > 0.0) {
                out.push(format!("k={}: ⟨ŵ, HᵀF⟩ = {slope:e} is not positive", rec.k));
            }
            if !hybrid && rec.gamma > 0.0 && !line_search::armijo_accepts(problem, &x, rec.f_val, w_hat, slope, rec.gamma) {
                out.push(format!("k={}: accepted γ = {} fails the Armijo test", rec.k, rec.gamma));
            }
        }
    }
    if let Some(last) = run.trace.last() {
        match run.termination {
            Termination::RootFound | Termination::CriticalNonRoot => {
                let bound = criticality_bound(cfg.tol_crit);
                if last.grad_half_norm > bound {
                    out.push(format!("final ||HᵀF|| = {:e} above {bound:e}", last.grad_half_norm));
                }
            }
            _ => {}
        }
        if run.termination == Termination::RootFound && last.f_val.sqrt() > cfg.tol_root {
            out.push(format!("RootFound with ||F|| = {:e}", last.f_val.sqrt()));
        }
    }
    Ok(out)
}
