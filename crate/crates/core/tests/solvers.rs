use nalgebra::DVector;
use proptest::prelude::*;
use qnsolve::diagnostics::{audit_run, estimate_order};
use qnsolve::problem::corpus::{self, circles2d, cubic2d, newton_cycle, newton_cycle_root, quad1d, saddle1d};
use qnsolve::solvers::{solve_resolved, Basis};
use qnsolve::{solve, LineSearch, Method, SolverConfig, Termination};

fn v(x: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(x)
}

#[test]
fn beta_half_reproduces_halving_on_every_corpus_problem() {
    for p in corpus::corpus() {
        for method in [Method::NqnSe, Method::LmM, Method::General] {
            let halving = SolverConfig { method, rng_seed: 3, ..Default::default() };
            let grid = SolverConfig { line_search: LineSearch::BetaGrid(Some(0.5)), ..halving.clone() };
            let a = solve(&p, &halving, &p.default_start()).unwrap();
            let b = solve(&p, &grid, &p.default_start()).unwrap();
            assert_eq!(a.trace, b.trace, "{} {:?}", p.name(), method);
        }
    }
}

#[test]
fn run_result_invariants() {
    for p in corpus::corpus() {
        for method in [Method::NqnSe, Method::LmM] {
            let cfg = SolverConfig::with_method(method);
            let r = solve(&p, &cfg, &p.default_start()).unwrap();
            let last = r.trace.last().unwrap();
            let x = r.final_point();
            let norm_f = p.residual(&x).unwrap().norm();
            match r.termination {
                Termination::RootFound => assert!(norm_f <= cfg.tol_root),
                Termination::CriticalNonRoot => {
                    assert!(last.grad_half_norm <= cfg.tol_crit);
                    assert!(norm_f > cfg.tol_root);
                }
                _ => {}
            }
            assert_eq!(last.x, r.final_x);
            assert_eq!(r.trace.iter().map(|t| t.k).collect::<Vec<_>>(), (0..r.trace.len()).collect::<Vec<_>>());
        }
    }
}

#[test]
fn quadratic_rate_measured_against_known_roots() {
    for p in [quad1d(), cubic2d(), circles2d()] {
        for method in [Method::NqnSe, Method::LmM] {
            let r = solve(&p, &SolverConfig::with_method(method), &p.default_start()).unwrap();
            assert_eq!(r.termination, Termination::RootFound);
            let x = r.final_point();
            let root = p
                .known_roots()
                .iter()
                .min_by(|a, b| (*a - &x).norm().total_cmp(&(*b - &x).norm()))
                .unwrap();
            let errors: Vec<f64> = r.trace.iter().map(|t| (v(&t.x) - root).norm()).collect();
            let order = estimate_order(&errors).unwrap();
            assert!((1.7..=2.3).contains(&order), "{} {:?}: {order}", p.name(), method);
        }
    }
}

#[test]
fn hybrid_runs_descend_and_converge() {
    let cfg = SolverConfig {
        line_search: LineSearch::Hybrid { eta: 0.5, inner: Box::new(LineSearch::Halving) },
        ..Default::default()
    };
    for p in [quad1d(), cubic2d(), circles2d()] {
        let r = solve(&p, &cfg, &p.default_start()).unwrap();
        assert_eq!(r.termination, Termination::RootFound, "{}", p.name());
        let resolved = cfg.resolve(&p).unwrap();
        assert!(audit_run(&p, &resolved, &r).unwrap().is_empty());
    }
}

#[test]
fn eigenbasis_general_run_matches_nqnse() {
    for p in [quad1d(), cubic2d(), circles2d(), saddle1d()] {
        let nqn = solve(&p, &SolverConfig::default(), &p.default_start()).unwrap();
        let general = SolverConfig { method: Method::General, basis: Basis::EigenOfA, q: 1.5, ..Default::default() };
        let gen = solve(&p, &general, &p.default_start()).unwrap();
        assert_eq!(nqn.termination, gen.termination);
        assert_eq!(nqn.trace.len(), gen.trace.len(), "{}", p.name());
        for (a, b) in nqn.trace.iter().zip(&gen.trace) {
            assert!((v(&a.x) - v(&b.x)).norm() <= 1e-9 * v(&a.x).norm().max(1.0));
        }
    }
}

#[test]
fn newton_baseline_two_cycle() {
    let r = solve(
        &newton_cycle(),
        &SolverConfig { max_iter: 100, ..SolverConfig::with_method(Method::NewtonBaseline) },
        &v(&[0.0]),
    )
    .unwrap();
    assert_eq!(r.termination, Termination::MaxIterations);
    assert_eq!(r.trace.len(), 101);
    // starting beside the root instead converges
    let near = solve(&newton_cycle(), &SolverConfig::with_method(Method::NewtonBaseline), &v(&[-1.7])).unwrap();
    assert_eq!(near.termination, Termination::RootFound);
    assert!((near.final_x[0] - newton_cycle_root()).abs() < 1e-9);
}

#[test]
fn det_guard_keeps_saddle1d_iterates_away_from_zero() {
    let guarded = SolverConfig { det_guard: Some(0.1), ..Default::default() };
    for x0 in [0.06, -0.07, 0.3, 2.5, -3.0] {
        let r = solve(&saddle1d(), &guarded, &v(&[x0])).unwrap();
        for rec in &r.trace {
            assert!(2.0 * rec.x[0].abs() > 0.1, "iterate {} from {x0}", rec.x[0]);
        }
    }
}

#[test]
fn lmm_overdetermined_converges() {
    let p = corpus::overdet();
    let r = solve(&p, &SolverConfig::with_method(Method::LmM), &v(&[1.0])).unwrap();
    assert_eq!(r.termination, Termination::RootFound);
    assert!(r.final_x[0].abs() < 1e-10);
}

#[test]
fn seeds_change_ladders_but_not_validity() {
    let p = cubic2d();
    let a = solve(&p, &SolverConfig { rng_seed: 1, ..Default::default() }, &p.default_start()).unwrap();
    let b = solve(&p, &SolverConfig { rng_seed: 2, ..Default::default() }, &p.default_start()).unwrap();
    assert_ne!(a.deltas, b.deltas);
    assert_eq!(a.deltas.len(), 3);
    for r in [a, b] {
        assert_eq!(r.termination, Termination::RootFound);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn descent_and_audit_from_random_starts(
        problem in 0usize..7,
        method in prop::sample::select(vec![Method::NqnSe, Method::LmM, Method::General]),
        seed in 0u64..1000,
        coords in prop::collection::vec(-3.0f64..3.0, 2),
    ) {
        let p = corpus::corpus().swap_remove(problem);
        let x0 = DVector::from_iterator(p.domain_dim(), coords.into_iter().take(p.domain_dim()));
        let cfg = SolverConfig { method, rng_seed: seed, max_iter: 2000, ..Default::default() };
        let resolved = cfg.resolve(&p).unwrap();
        let r = solve_resolved(&p, &resolved, &x0).unwrap();
        let violations = audit_run(&p, &resolved, &r).unwrap();
        prop_assert!(violations.is_empty(), "{} {:?} from {}: {:?}", p.name(), method, x0, violations);
    }

    #[test]
    fn capture_near_known_roots(
        problem in 0usize..7,
        which in 0usize..3,
        offset in prop::collection::vec(-0.035f64..0.035, 2),
        seed in 0u64..1000,
    ) {
        let p = corpus::corpus().swap_remove(problem);
        let root = p.known_roots()[which % p.known_roots().len()].clone();
        let x0 = &root + DVector::from_iterator(p.domain_dim(), offset.into_iter().take(p.domain_dim()));
        let r = solve(&p, &SolverConfig { rng_seed: seed, ..Default::default() }, &x0).unwrap();
        prop_assert!((r.final_point() - &root).norm() <= 1e-6, "{} from {}", p.name(), x0);
    }
}
