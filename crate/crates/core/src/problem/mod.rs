//! Equation systems `F: ℝᵐ → ℝᵐ'` and the derivatives of `f = ||F||²`.

pub mod corpus;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::spectral::SymMatrix;
use crate::{Error, Result};

pub use corpus::{corpus, corpus_problem, corpus_names};

type VectorFn = dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync;
type MatrixFn = dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync;
type HessiansFn = dyn Fn(&DVector<f64>) -> Vec<SymMatrix> + Send + Sync;

/// Step-size rule for central differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    /// `h_i = ∛ε · (1 + |x_i|)`.
    Scaled,
    /// The same absolute step for every coordinate.
    Fixed(f64),
}

impl StepRule {
    pub fn step(&self, xi: f64) -> f64 {
        match *self {
            StepRule::Scaled => f64::EPSILON.cbrt() * (1.0 + xi.abs()),
            StepRule::Fixed(h) => h,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            StepRule::Fixed(h) if !(h > 0.0 && h.is_finite()) => Err(Error::InvalidInput(
                format!("finite-difference step must be positive, got {h}"),
            )),
            _ => Ok(()),
        }
    }
}

/// Which derivatives to use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DerivativeMode {
    /// Analytic evaluators when the problem has them. The Jacobian silently
    /// falls back to central differences; the Hessian does not.
    Analytic,
    CentralDifference(StepRule),
}

impl Default for DerivativeMode {
    fn default() -> Self {
        DerivativeMode::Analytic
    }
}

/// A system of equations together with whatever derivatives are known.
///
/// Evaluators must be pure; problems are shared across threads by the
/// experiment drivers.
#[derive(Clone)]
pub struct Problem {
    name: String,
    domain_dim: usize,
    codomain_dim: usize,
    residual: Arc<VectorFn>,
    jacobian: Option<Arc<MatrixFn>>,
    component_hessians: Option<Arc<HessiansFn>>,
    known_roots: Vec<DVector<f64>>,
    default_start: Option<DVector<f64>>,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("name", &self.name)
            .field("domain_dim", &self.domain_dim)
            .field("codomain_dim", &self.codomain_dim)
            .field("jacobian", &self.jacobian.is_some())
            .field("component_hessians", &self.component_hessians.is_some())
            .field("known_roots", &self.known_roots.len())
            .finish()
    }
}

impl Problem {
    pub fn new<F>(name: impl Into<String>, domain_dim: usize, codomain_dim: usize, residual: F) -> Self
    where
        F: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        assert!(domain_dim > 0 && codomain_dim > 0, "dimensions must be positive");
        Problem {
            name: name.into(),
            domain_dim,
            codomain_dim,
            residual: Arc::new(residual),
            jacobian: None,
            component_hessians: None,
            known_roots: Vec::new(),
            default_start: None,
        }
    }

    pub fn with_jacobian<J>(mut self, jacobian: J) -> Self
    where
        J: Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    {
        self.jacobian = Some(Arc::new(jacobian));
        self
    }

    /// Hessians `∇²F_i`, one per output component.
    pub fn with_component_hessians<H>(mut self, hessians: H) -> Self
    where
        H: Fn(&DVector<f64>) -> Vec<SymMatrix> + Send + Sync + 'static,
    {
        self.component_hessians = Some(Arc::new(hessians));
        self
    }

    pub fn with_known_roots(mut self, roots: Vec<DVector<f64>>) -> Self {
        self.known_roots = roots;
        self
    }

    pub fn with_default_start(mut self, x0: DVector<f64>) -> Self {
        self.default_start = Some(x0);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain_dim(&self) -> usize {
        self.domain_dim
    }

    pub fn codomain_dim(&self) -> usize {
        self.codomain_dim
    }

    pub fn is_square(&self) -> bool {
        self.domain_dim == self.codomain_dim
    }

    pub fn known_roots(&self) -> &[DVector<f64>] {
        &self.known_roots
    }

    pub fn default_start(&self) -> DVector<f64> {
        self.default_start
            .clone()
            .unwrap_or_else(|| DVector::from_element(self.domain_dim, 1.0))
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }

    pub fn has_component_hessians(&self) -> bool {
        self.component_hessians.is_some()
    }

    fn check_input(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.domain_dim {
            return Err(Error::DimensionMismatch {
                expected: self.domain_dim,
                got: x.len(),
            });
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("point has non-finite coordinates".into()));
        }
        Ok(())
    }

    /// `F(x)`.
    pub fn residual(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_input(x)?;
        let value = (self.residual)(x);
        if value.len() != self.codomain_dim {
            return Err(Error::DimensionMismatch {
                expected: self.codomain_dim,
                got: value.len(),
            });
        }
        if !value.iter().all(|v| v.is_finite()) {
            return Err(Error::EvaluationError { what: "F" });
        }
        Ok(value)
    }

    /// `f(x) = ||F(x)||²`.
    pub fn eval_f(&self, x: &DVector<f64>) -> Result<f64> {
        let f = self.residual(x)?.norm_squared();
        if f.is_finite() {
            Ok(f)
        } else {
            Err(Error::EvaluationError { what: "f" })
        }
    }

    /// `H(x) = JF(x)`, an `m' × m` matrix.
    pub fn jacobian(&self, x: &DVector<f64>, mode: DerivativeMode) -> Result<DMatrix<f64>> {
        self.check_input(x)?;
        let jac = match (mode, &self.jacobian) {
            (DerivativeMode::Analytic, Some(jac)) => jac(x),
            (DerivativeMode::Analytic, None) => self.fd_jacobian(x, StepRule::Scaled)?,
            (DerivativeMode::CentralDifference(rule), _) => self.fd_jacobian(x, rule)?,
        };
        if jac.shape() != (self.codomain_dim, self.domain_dim) {
            return Err(Error::InvalidInput(format!(
                "jacobian has shape {:?}, expected {:?}",
                jac.shape(),
                (self.codomain_dim, self.domain_dim)
            )));
        }
        if !jac.iter().all(|v| v.is_finite()) {
            return Err(Error::EvaluationError { what: "JF" });
        }
        Ok(jac)
    }

    fn fd_jacobian(&self, x: &DVector<f64>, rule: StepRule) -> Result<DMatrix<f64>> {
        rule.validate()?;
        let mut jac = DMatrix::zeros(self.codomain_dim, self.domain_dim);
        let mut probe = x.clone();
        for i in 0..self.domain_dim {
            let h = rule.step(x[i]);
            probe[i] = x[i] + h;
            let plus = self.residual(&probe)?;
            probe[i] = x[i] - h;
            let minus = self.residual(&probe)?;
            probe[i] = x[i];
            jac.set_column(i, &((plus - minus) / (2.0 * h)));
        }
        Ok(jac)
    }

    /// `HᵀF`, which is `∇f / 2`.
    pub fn grad_half(&self, x: &DVector<f64>, mode: DerivativeMode) -> Result<DVector<f64>> {
        let r = self.residual(x)?;
        let h = self.jacobian(x, mode)?;
        Ok(h.tr_mul(&r))
    }

    /// `∇f(x) = 2 H(x)ᵀ F(x)`, with the analytic Jacobian when available.
    pub fn grad_f(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.grad_half(x, DerivativeMode::Analytic)? * 2.0)
    }

    /// `Σ_i F_i(x) ∇²F_i(x)`, written `∇²F(x)·F(x)` in the saddle definitions.
    pub fn weighted_component_hessian(&self, x: &DVector<f64>) -> Result<SymMatrix> {
        let hessians = self.component_hessians.as_ref().ok_or_else(|| Error::MissingDerivative {
            problem: self.name.clone(),
            what: "component Hessians",
        })?;
        let r = self.residual(x)?;
        let hs = hessians(x);
        if hs.len() != self.codomain_dim {
            return Err(Error::DimensionMismatch {
                expected: self.codomain_dim,
                got: hs.len(),
            });
        }
        let mut acc = DMatrix::zeros(self.domain_dim, self.domain_dim);
        for (fi, hi) in r.iter().zip(hs.iter()) {
            if hi.dim() != self.domain_dim {
                return Err(Error::DimensionMismatch {
                    expected: self.domain_dim,
                    got: hi.dim(),
                });
            }
            acc += hi.matrix() * *fi;
        }
        SymMatrix::new(acc)
    }

    /// `∇²f / 2 = HᵀH + Σ_i F_i ∇²F_i`, the curvature matching `HᵀF`.
    pub fn half_hessian(&self, x: &DVector<f64>, mode: DerivativeMode) -> Result<SymMatrix> {
        match mode {
            DerivativeMode::Analytic => {
                let h = self.jacobian(x, mode)?;
                let weighted = self.weighted_component_hessian(x)?;
                SymMatrix::gram(&h).add(&weighted)
            }
            DerivativeMode::CentralDifference(rule) => {
                rule.validate()?;
                let m = self.domain_dim;
                let mut cols = DMatrix::zeros(m, m);
                let mut probe = x.clone();
                for i in 0..m {
                    let h = rule.step(x[i]);
                    probe[i] = x[i] + h;
                    let plus = self.grad_half(&probe, DerivativeMode::Analytic)?;
                    probe[i] = x[i] - h;
                    let minus = self.grad_half(&probe, DerivativeMode::Analytic)?;
                    probe[i] = x[i];
                    cols.set_column(i, &((plus - minus) / (2.0 * h)));
                }
                let hess = SymMatrix::new(cols)?;
                if hess.matrix().iter().all(|v| v.is_finite()) {
                    Ok(hess)
                } else {
                    Err(Error::EvaluationError { what: "hessian" })
                }
            }
        }
    }

    /// `∇²f(x) = 2 (HᵀH + Σ_i F_i ∇²F_i)`.
    ///
    /// In [`DerivativeMode::Analytic`] this needs component Hessians; the
    /// difference mode differentiates `∇f` column by column and symmetrises.
    pub fn hess_f(&self, x: &DVector<f64>, mode: DerivativeMode) -> Result<SymMatrix> {
        Ok(self.half_hessian(x, mode)?.scaled(2.0))
    }

    /// `det JF(x)` for square systems.
    pub fn jacobian_determinant(&self, x: &DVector<f64>, mode: DerivativeMode) -> Result<f64> {
        if !self.is_square() {
            return Err(Error::InvalidInput(format!(
                "determinant undefined for a {}x{} Jacobian",
                self.codomain_dim, self.domain_dim
            )));
        }
        Ok(self.jacobian(x, mode)?.determinant())
    }
}
