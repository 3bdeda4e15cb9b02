use serde::Serialize;

use super::DeltaLadder;
use crate::spectral::{eigh, SpectralDecomposition, SymMatrix};
use crate::{Error, Result};

/// Which power of `||F||` scaled the identity shift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Branch {
    /// `minsp` of the curvature matrix exceeded `||F||^τ`; shift by `δ_j ||F||`.
    FullNorm,
    /// Otherwise; shift by `δ_j ||F||^τ`.
    TauNorm,
    /// No regularisation (Newton baseline, terminal records).
    None,
}

impl Branch {
    pub fn as_str(&self) -> &'static str {
        match self {
            Branch::FullNorm => "FullNorm",
            Branch::TauNorm => "TauNorm",
            Branch::None => "None",
        }
    }
}

/// A regularised matrix `A = B + δ_j·s·Id` together with its spectrum.
#[derive(Debug, Clone)]
pub struct Regularized {
    pub matrix: SymMatrix,
    pub spectrum: SpectralDecomposition,
    pub delta_index: usize,
    pub branch: Branch,
    /// `s`, either `||F||` or `||F||^τ`.
    pub scale: f64,
    /// `κ·s`, the eigenvalue floor the ladder had to clear.
    pub floor: f64,
}

impl Regularized {
    pub fn minsp(&self) -> f64 {
        self.spectrum.minsp()
    }
}

fn check_norm(norm_f: f64) -> Result<()> {
    if norm_f > 0.0 && norm_f.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("||F|| must be positive and finite, got {norm_f}")))
    }
}

fn choose_scale(curvature_minsp: f64, norm_f: f64, tau: f64) -> (f64, Branch) {
    let tau_scale = norm_f.powf(tau);
    if curvature_minsp > tau_scale {
        (norm_f, Branch::FullNorm)
    } else {
        (tau_scale, Branch::TauNorm)
    }
}

/// Walks the δ-ladder until `minsp(B + δ_j·s·Id) ≥ κ·s`.
///
/// `s = ||F||` when `minsp(B) > ||F||^τ`, else `s = ||F||^τ`. Only one
/// eigendecomposition is computed; shifting by a multiple of the identity
/// moves every eigenvalue by the same amount.
pub fn regularize_nqnse(
    curvature: &SymMatrix,
    norm_f: f64,
    ladder: &DeltaLadder,
    tau: f64,
) -> Result<Regularized> {
    check_norm(norm_f)?;
    let base = eigh(curvature)?;
    let (scale, branch) = choose_scale(base.minsp(), norm_f, tau);
    let floor = ladder.kappa() * scale;
    for (j, &delta) in ladder.values().iter().enumerate() {
        let shift = delta * scale;
        let spectrum = base.shifted(shift);
        if spectrum.minsp() >= floor {
            return Ok(Regularized {
                matrix: curvature.shifted(shift),
                spectrum,
                delta_index: j,
                branch,
                scale,
                floor,
            });
        }
    }
    Err(Error::RegularizationFailed { floor })
}

/// `HᵀH + δ₀||F||·Id` when `minsp(HᵀH) > ||F||^τ`, else `HᵀH + δ₁||F||^τ·Id`.
pub fn regularize_lmm(
    gram: &SymMatrix,
    norm_f: f64,
    ladder: &DeltaLadder,
    tau: f64,
) -> Result<Regularized> {
    check_norm(norm_f)?;
    if ladder.len() != 2 {
        return Err(Error::InvalidInput(format!(
            "Levenberg-Marquardt M takes exactly two deltas, got {}",
            ladder.len()
        )));
    }
    let base = eigh(gram)?;
    let (scale, branch) = choose_scale(base.minsp(), norm_f, tau);
    let delta_index = match branch {
        Branch::FullNorm => 0,
        _ => 1,
    };
    let shift = ladder.values()[delta_index] * scale;
    Ok(Regularized {
        matrix: gram.shifted(shift),
        spectrum: base.shifted(shift),
        delta_index,
        branch,
        scale,
        floor: ladder.kappa() * scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ladder(v: &[f64]) -> DeltaLadder {
        DeltaLadder::new(v.to_vec()).unwrap()
    }

    #[test]
    fn nqnse_full_norm_branch() {
        let r = regularize_nqnse(&SymMatrix::from_diagonal(&[44.0]), 3.0, &ladder(&[1.0, 2.0]), 0.5).unwrap();
        assert_eq!(r.branch, Branch::FullNorm);
        assert_eq!(r.delta_index, 0);
        assert_eq!(r.matrix.matrix()[(0, 0)], 47.0);
        assert_eq!(r.scale, 3.0);
    }

    #[test]
    fn nqnse_walks_the_ladder() {
        let r = regularize_nqnse(&SymMatrix::from_diagonal(&[-1.0]), 1.0, &ladder(&[1.0, 2.0]), 0.5).unwrap();
        assert_eq!(r.branch, Branch::TauNorm);
        assert_eq!(r.delta_index, 1);
        assert_eq!(r.matrix.matrix()[(0, 0)], 1.0);
        assert_eq!(r.floor, 0.5);
        assert!(r.minsp() >= r.floor);
    }

    #[test]
    fn nqnse_tiny_residual() {
        let r = regularize_nqnse(&SymMatrix::identity(2), 1e-12, &ladder(&[1.0, 1.5, 2.0]), 0.5).unwrap();
        assert_eq!(r.branch, Branch::FullNorm);
        assert_eq!(r.delta_index, 0);
        assert!((r.matrix.matrix() - SymMatrix::identity(2).matrix()).amax() < 1e-11);
    }

    #[test]
    fn nqnse_exhausted_ladder() {
        // every shift lands exactly on an eigenvalue
        let hess = SymMatrix::from_diagonal(&[-1.0, -2.0]);
        let err = regularize_nqnse(&hess, 1.0, &ladder(&[1.0, 2.0]), 0.5);
        assert!(matches!(err, Err(Error::RegularizationFailed { .. })));
    }

    #[test]
    fn nqnse_rejects_zero_residual() {
        let err = regularize_nqnse(&SymMatrix::identity(1), 0.0, &ladder(&[1.0, 2.0]), 0.5);
        assert!(matches!(err, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn lmm_examples() {
        let r = regularize_lmm(&SymMatrix::from_diagonal(&[16.0]), 3.0, &ladder(&[1.0, 2.0]), 0.5).unwrap();
        assert_eq!((r.delta_index, r.branch), (0, Branch::FullNorm));
        assert_eq!(r.matrix.matrix()[(0, 0)], 19.0);

        let r = regularize_lmm(&SymMatrix::zeros(1), 1.0, &ladder(&[1.0, 2.0]), 0.5).unwrap();
        assert_eq!((r.delta_index, r.branch), (1, Branch::TauNorm));
        assert_eq!(r.matrix.matrix()[(0, 0)], 2.0);

        let r = regularize_lmm(&SymMatrix::identity(2), 1e-8, &ladder(&[1.0, 2.0]), 0.5).unwrap();
        assert_eq!(r.branch, Branch::FullNorm);
        assert_abs_diff_eq!(r.matrix.matrix()[(0, 0)], 1.0 + 1e-8, epsilon = 1e-16);
        assert_eq!(r.matrix.matrix()[(0, 1)], 0.0);
    }

    #[test]
    fn lmm_needs_two_deltas() {
        let err = regularize_lmm(&SymMatrix::zeros(1), 1.0, &ladder(&[1.0, 2.0, 3.0]), 0.5);
        assert!(err.is_err());
    }
}
