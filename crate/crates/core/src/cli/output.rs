use std::fmt::Write as _;

use serde::Serialize;

use crate::diagnostics::{classify_limit, ClassifyTolerances, LimitReport};
use crate::problem::Problem;
use crate::solvers::{LineSearch, ResolvedConfig, RunResult, Termination};

/// Contents of `summary.json`.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub problem: String,
    pub method: String,
    pub seed: u64,
    pub termination: Termination,
    /// Number of trace records, `x0` included.
    pub iterations: usize,
    pub final_x: Vec<f64>,
    pub final_f: f64,
    pub final_grad_half_norm: f64,
    pub order_estimate: Option<f64>,
    pub limit: Option<LimitReport>,
    pub tau: f64,
    pub deltas: Vec<f64>,
    pub kappa: f64,
    pub line_search: String,
    pub beta: f64,
}

fn describe(ls: &LineSearch, beta: f64) -> String {
    match ls {
        LineSearch::Halving => "halving".into(),
        LineSearch::BetaGrid(_) => format!("beta-grid({beta})"),
        LineSearch::Hybrid { eta, inner } => format!("hybrid(eta={eta}, {})", describe(inner, beta)),
    }
}

impl RunSummary {
    pub fn new(problem: &Problem, resolved: &ResolvedConfig, run: &RunResult) -> Self {
        let cfg = &resolved.config;
        let last = run.trace.last();
        let limit = match run.termination {
            Termination::RootFound | Termination::CriticalNonRoot => {
                let tols = ClassifyTolerances {
                    tol_root: cfg.tol_root,
                    tol_crit: 2.0 * cfg.tol_crit.max(1e-6),
                    ..Default::default()
                };
                classify_limit(problem, &run.final_point(), &tols).ok()
            }
            _ => None,
        };
        RunSummary {
            problem: problem.name().to_string(),
            method: cfg.method.cli_name().to_string(),
            seed: run.seed,
            termination: run.termination,
            iterations: run.trace.len(),
            final_x: run.final_x.clone(),
            final_f: last.map_or(f64::NAN, |r| r.f_val),
            final_grad_half_norm: last.map_or(f64::NAN, |r| r.grad_half_norm),
            order_estimate: run.order_estimate,
            limit,
            tau: cfg.tau,
            deltas: run.deltas.clone(),
            kappa: run.kappa,
            line_search: describe(&cfg.line_search, run.beta),
            beta: run.beta,
        }
    }
}

pub fn summary_json(summary: &RunSummary) -> String {
    let mut s = serde_json::to_string_pretty(summary).expect("summary serialises");
    s.push('\n');
    s
}

/// One row per trace record: `k, x0..x{m-1}, f, grad_half_norm, delta_index,
/// branch, minsp_A, gamma, step_norm`. Missing values are left empty.
pub fn trace_csv(run: &RunResult, m: usize) -> String {
    let mut out = String::from("k");
    for i in 0..m {
        write!(out, ",x{i}").unwrap();
    }
    out.push_str(",f,grad_half_norm,delta_index,branch,minsp_A,gamma,step_norm\n");
    for r in &run.trace {
        write!(out, "{}", r.k).unwrap();
        for xi in &r.x {
            write!(out, ",{xi:e}").unwrap();
        }
        writeln!(
            out,
            ",{:e},{:e},{},{},{},{:e},{:e}",
            r.f_val,
            r.grad_half_norm,
            r.delta_index.map_or(String::new(), |j| j.to_string()),
            r.branch.as_str(),
            r.minsp_a.map_or(String::new(), |v| format!("{v:e}")),
            r.gamma,
            r.step_norm
        )
        .unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::corpus::quad1d;
    use crate::solvers::{solve_resolved, SolverConfig};

    #[test]
    fn csv_shape() {
        let p = quad1d();
        let resolved = SolverConfig::default().resolve(&p).unwrap();
        let run = solve_resolved(&p, &resolved, &p.default_start()).unwrap();
        let csv = trace_csv(&run, 1);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("k,x0,f,grad_half_norm,delta_index,branch,minsp_A,gamma,step_norm"));
        assert!(lines.next().unwrap().starts_with("0,2e0,4e0,8e0,0,FullNorm,"));
        assert_eq!(csv.lines().count(), run.trace.len() + 1);
        assert!(csv.lines().last().unwrap().contains(",,None,,0e0,0e0"));

        let s = RunSummary::new(&p, &resolved, &run);
        assert_eq!(s.iterations, run.trace.len());
        assert_eq!(s.limit.unwrap().class, crate::diagnostics::LimitClass::RootNonDegenerate);
    }
}
