use nalgebra::{DMatrix, DVector};

use crate::spectral::{SpectralDecomposition, SymMatrix};
use crate::{Error, Result};

/// A search direction and its normalised form `ŵ = w / max{1, ||w||}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Direction {
    pub w: DVector<f64>,
    pub w_hat: DVector<f64>,
}

impl Direction {
    pub fn from_raw(w: DVector<f64>) -> Self {
        let w_hat = &w / w.norm().max(1.0);
        Direction { w, w_hat }
    }
}

/// `w = |A|⁻¹ HᵀF`: the regularised Newton step with its components in the
/// negative eigenspace of `A` reflected.
pub fn direction_nqnse(a: &SymMatrix, grad_half: &DVector<f64>) -> Result<Direction> {
    let spectrum = crate::spectral::eigh(a)?;
    direction_nqnse_from_spectrum(&spectrum, grad_half)
}

pub fn direction_nqnse_from_spectrum(
    spectrum: &SpectralDecomposition,
    grad_half: &DVector<f64>,
) -> Result<Direction> {
    Ok(Direction::from_raw(spectrum.reflected_solve(grad_half)?))
}

/// `w = A⁻¹ HᵀF` for positive definite `A`, via Cholesky.
pub fn direction_lmm(a: &SymMatrix, grad_half: &DVector<f64>) -> Result<Direction> {
    if a.dim() != grad_half.len() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: grad_half.len(),
        });
    }
    let chol = a
        .matrix()
        .clone()
        .cholesky()
        .ok_or(Error::SingularMatrix {
            min_abs_eigenvalue: 0.0,
        })?;
    let w = chol.solve(grad_half);
    if !w.iter().all(|v| v.is_finite()) {
        return Err(Error::SingularMatrix {
            min_abs_eigenvalue: 0.0,
        });
    }
    Ok(Direction::from_raw(w))
}

/// Row weights `||A eᵢ||_q = (Σ_j |⟨A eᵢ, e_j⟩|^q)^{1/q}` in the basis given
/// by the columns of `basis`.
pub fn q_norm_weights(a: &SymMatrix, basis: &DMatrix<f64>, q: f64) -> Result<DVector<f64>> {
    if !(q >= 1.0 && q.is_finite()) {
        return Err(Error::InvalidInput(format!("q must be a finite real ≥ 1, got {q}")));
    }
    let n = a.dim();
    if basis.shape() != (n, n) {
        return Err(Error::InvalidInput(format!(
            "basis has shape {:?}, expected {n}x{n}",
            basis.shape()
        )));
    }
    let gram = basis.tr_mul(basis);
    if (gram - DMatrix::<f64>::identity(n, n)).amax() > 1e-10 {
        return Err(Error::InvalidInput("basis is not orthonormal".into()));
    }
    // coefficient (i, j) is ⟨A eᵢ, e_j⟩
    let coeffs = basis.tr_mul(&(a.matrix() * basis));
    Ok(DVector::from_iterator(
        n,
        (0..n).map(|i| {
            if q == 1.0 {
                coeffs.row(i).iter().map(|c| c.abs()).sum()
            } else {
                coeffs
                    .row(i)
                    .iter()
                    .map(|c| c.abs().powf(q))
                    .sum::<f64>()
                    .powf(1.0 / q)
            }
        }),
    ))
}

/// `w = Σᵢ ⟨g, eᵢ⟩ / ||A eᵢ||_q · eᵢ`.
///
/// With `basis` the eigenvectors of `A`, every weight is `|λᵢ|` and this is
/// exactly the reflected solve.
pub fn direction_general(
    a: &SymMatrix,
    g: &DVector<f64>,
    basis: &DMatrix<f64>,
    q: f64,
) -> Result<Direction> {
    if a.dim() != g.len() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: g.len(),
        });
    }
    let weights = q_norm_weights(a, basis, q)?;
    let smallest = weights.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(smallest > 0.0) {
        return Err(Error::SingularMatrix {
            min_abs_eigenvalue: smallest,
        });
    }
    let coords = basis.tr_mul(g).component_div(&weights);
    Ok(Direction::from_raw(basis * coords))
}
