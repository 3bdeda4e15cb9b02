//! Built-in test systems, addressed by name from the CLI.

use nalgebra::{DMatrix, DVector};

use super::Problem;
use crate::spectral::SymMatrix;

fn v(x: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(x)
}

fn m(rows: usize, cols: usize, entries: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(rows, cols, entries)
}

fn s(n: usize, entries: &[f64]) -> SymMatrix {
    SymMatrix::from_rows(n, entries).expect("corpus hessian shape")
}

/// `x² - 2`; simple roots `±√2`.
pub fn quad1d() -> Problem {
    let r = 2f64.sqrt();
    Problem::new("quad1d", 1, 1, |x| v(&[x[0] * x[0] - 2.0]))
        .with_jacobian(|x| m(1, 1, &[2.0 * x[0]]))
        .with_component_hessians(|_| vec![s(1, &[2.0])])
        .with_known_roots(vec![v(&[r]), v(&[-r])])
        .with_default_start(v(&[2.0]))
}

/// `1 - x²`; roots `±1`, and `f` has a saddle-type maximum at `0` with
/// `∇²F·F = -2`.
pub fn saddle1d() -> Problem {
    Problem::new("saddle1d", 1, 1, |x| v(&[1.0 - x[0] * x[0]]))
        .with_jacobian(|x| m(1, 1, &[-2.0 * x[0]]))
        .with_component_hessians(|_| vec![s(1, &[-2.0])])
        .with_known_roots(vec![v(&[1.0]), v(&[-1.0])])
        .with_default_start(v(&[0.01]))
}

/// Real root of `x³ - 2x + 2` by Cardano's formula.
pub fn newton_cycle_root() -> f64 {
    let d = (1.0f64 - 8.0 / 27.0).sqrt();
    (-1.0 + d).cbrt() + (-1.0 - d).cbrt()
}

/// `x³ - 2x + 2`; plain Newton cycles `0 → 1 → 0`.
pub fn newton_cycle() -> Problem {
    Problem::new("newton_cycle", 1, 1, |x| v(&[x[0].powi(3) - 2.0 * x[0] + 2.0]))
        .with_jacobian(|x| m(1, 1, &[3.0 * x[0] * x[0] - 2.0]))
        .with_component_hessians(|x| vec![s(1, &[6.0 * x[0]])])
        .with_known_roots(vec![v(&[newton_cycle_root()])])
        .with_default_start(v(&[0.0]))
}

/// Real form of `z³ - 1`.
pub fn cubic2d() -> Problem {
    let h = 3f64.sqrt() / 2.0;
    Problem::new("cubic2d", 2, 2, |p| {
        let (x, y) = (p[0], p[1]);
        v(&[x * x * x - 3.0 * x * y * y - 1.0, 3.0 * x * x * y - y * y * y])
    })
    .with_jacobian(|p| {
        let (x, y) = (p[0], p[1]);
        let d = 3.0 * x * x - 3.0 * y * y;
        m(2, 2, &[d, -6.0 * x * y, 6.0 * x * y, d])
    })
    .with_component_hessians(|p| {
        let (x, y) = (p[0], p[1]);
        vec![
            s(2, &[6.0 * x, -6.0 * y, -6.0 * y, -6.0 * x]),
            s(2, &[6.0 * y, 6.0 * x, 6.0 * x, -6.0 * y]),
        ]
    })
    .with_known_roots(vec![v(&[1.0, 0.0]), v(&[-0.5, h]), v(&[-0.5, -h])])
    .with_default_start(v(&[1.3, 0.4]))
}

/// Two intersecting circles; roots `(1.5, ±√1.75)`.
pub fn circles2d() -> Problem {
    let y = 1.75f64.sqrt();
    Problem::new("circles2d", 2, 2, |p| {
        let (x, y) = (p[0], p[1]);
        v(&[x * x + y * y - 4.0, (x - 1.0) * (x - 1.0) + y * y - 2.0])
    })
    .with_jacobian(|p| {
        let (x, y) = (p[0], p[1]);
        m(2, 2, &[2.0 * x, 2.0 * y, 2.0 * (x - 1.0), 2.0 * y])
    })
    .with_component_hessians(|_| vec![SymMatrix::identity(2).scaled(2.0); 2])
    .with_known_roots(vec![v(&[1.5, y]), v(&[1.5, -y])])
    .with_default_start(v(&[2.0, 2.0]))
}

/// Rosenbrock's function written as a system; root `(1, 1)`.
pub fn rosen_sys() -> Problem {
    Problem::new("rosen_sys", 2, 2, |p| {
        let (x, y) = (p[0], p[1]);
        v(&[10.0 * (y - x * x), 1.0 - x])
    })
    .with_jacobian(|p| m(2, 2, &[-20.0 * p[0], 10.0, -1.0, 0.0]))
    .with_component_hessians(|_| vec![s(2, &[-20.0, 0.0, 0.0, 0.0]), SymMatrix::zeros(2)])
    .with_known_roots(vec![v(&[1.0, 1.0])])
    .with_default_start(v(&[-1.2, 1.0]))
}

/// Overdetermined `ℝ → ℝ²`, `(x, x²)`; root `0`.
pub fn overdet() -> Problem {
    Problem::new("overdet", 1, 2, |x| v(&[x[0], x[0] * x[0]]))
        .with_jacobian(|x| m(2, 1, &[1.0, 2.0 * x[0]]))
        .with_component_hessians(|_| vec![SymMatrix::zeros(1), s(1, &[2.0])])
        .with_known_roots(vec![v(&[0.0])])
        .with_default_start(v(&[1.0]))
}

/// Every built-in problem, in a fixed order.
pub fn corpus() -> Vec<Problem> {
    vec![
        quad1d(),
        saddle1d(),
        newton_cycle(),
        cubic2d(),
        circles2d(),
        rosen_sys(),
        overdet(),
    ]
}

pub fn corpus_names() -> Vec<String> {
    corpus().iter().map(|p| p.name().to_string()).collect()
}

pub fn corpus_problem(name: &str) -> Option<Problem> {
    corpus().into_iter().find(|p| p.name() == name)
}
