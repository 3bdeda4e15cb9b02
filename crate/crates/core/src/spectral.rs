//! Dense symmetric eigen-utilities.
//!
//! Every solver in this crate controls its step through the spectrum of a
//! symmetric matrix: the smallest absolute eigenvalue (`minsp`) decides how
//! much to regularise, and the sign of each eigenvalue decides whether the
//! corresponding component of the Newton step is kept or reflected.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::{Error, Result};

/// Relative threshold below which an eigenvalue is treated as zero.
pub const ZERO_EIGENVALUE_RTOL: f64 = 1e-14;

/// A dense real symmetric matrix.
///
/// The input is symmetrised as `(A + Aᵀ) / 2` on construction, so
/// `entries[(i, j)] == entries[(j, i)]` holds bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    entries: DMatrix<f64>,
}

impl SymMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::InvalidInput(format!(
                "symmetric matrix must be square, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        let n = entries.nrows();
        let mut sym = entries;
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (sym[(i, j)] + sym[(j, i)]);
                sym[(i, j)] = avg;
                sym[(j, i)] = avg;
            }
        }
        Ok(SymMatrix { entries: sym })
    }

    /// Row-major construction, mostly for tests and fixtures.
    pub fn from_rows(n: usize, rows: &[f64]) -> Result<Self> {
        if rows.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: rows.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(n, n, rows))
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix {
            entries: DMatrix::identity(n, n),
        }
    }

    pub fn zeros(n: usize) -> Self {
        SymMatrix {
            entries: DMatrix::zeros(n, n),
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        SymMatrix {
            entries: DMatrix::from_diagonal(&DVector::from_column_slice(diag)),
        }
    }

    /// `HᵀH` for a (possibly rectangular) matrix `H`.
    pub fn gram(h: &DMatrix<f64>) -> Self {
        // tr_mul is not guaranteed to be bitwise symmetric
        Self::new(h.tr_mul(h)).expect("HᵀH is square")
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.norm()
    }

    /// `A + c·Id`.
    pub fn shifted(&self, c: f64) -> Self {
        let mut entries = self.entries.clone();
        for i in 0..self.dim() {
            entries[(i, i)] += c;
        }
        SymMatrix { entries }
    }

    pub fn scaled(&self, c: f64) -> Self {
        SymMatrix {
            entries: &self.entries * c,
        }
    }

    /// Sum of two symmetric matrices of the same size.
    pub fn add(&self, other: &SymMatrix) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(SymMatrix {
            entries: &self.entries + &other.entries,
        })
    }

    pub fn mul_vec(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.entries * v
    }

    fn check_finite(&self) -> Result<()> {
        if self.entries.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidInput(
                "matrix has non-finite entries".to_string(),
            ))
        }
    }
}

/// Eigenvalues in ascending order with matching orthonormal eigenvectors
/// stored as the columns of `eigenvectors`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
    /// Frobenius norm of the decomposed matrix, kept for scale-aware
    /// zero tests.
    scale: f64,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvector(&self, i: usize) -> DVector<f64> {
        self.eigenvectors.column(i).into_owned()
    }

    /// Smallest absolute eigenvalue.
    pub fn minsp(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|l| l.abs())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues[self.dim() - 1]
    }

    /// Decomposition of `A + c·Id`: same eigenvectors, eigenvalues moved by `c`.
    pub fn shifted(&self, c: f64) -> Self {
        let n = self.dim() as f64;
        SpectralDecomposition {
            eigenvalues: self.eigenvalues.add_scalar(c),
            eigenvectors: self.eigenvectors.clone(),
            // ||A + cI||_F ≤ ||A||_F + |c|√n
            scale: self.scale + c.abs() * n.sqrt(),
        }
    }

    /// `Σ λᵢ eᵢ eᵢᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let d = DMatrix::from_diagonal(&self.eigenvalues);
        &self.eigenvectors * d * self.eigenvectors.transpose()
    }

    /// Solves `|A| w = b` where `|A|` has eigenvalues `|λᵢ|`; equivalently,
    /// solves `A v = b` and flips the component of `v` lying in the negative
    /// eigenspace.
    pub fn reflected_solve(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        if b.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: b.len(),
            });
        }
        let zero = ZERO_EIGENVALUE_RTOL * self.scale.max(1.0);
        let minsp = self.minsp();
        if minsp <= zero {
            return Err(Error::SingularMatrix {
                min_abs_eigenvalue: minsp,
            });
        }
        let coords = self.eigenvectors.tr_mul(b);
        let weighted = coords.zip_map(&self.eigenvalues, |c, l| c / l.abs());
        Ok(&self.eigenvectors * weighted)
    }
}

/// Eigendecomposition of a symmetric matrix, eigenvalues ascending.
pub fn eigh(a: &SymMatrix) -> Result<SpectralDecomposition> {
    a.check_finite()?;
    let scale = a.frobenius_norm();
    let eig = SymmetricEigen::new(a.matrix().clone());
    let n = a.dim();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
        scale,
    })
}

/// `min { |λ| : λ eigenvalue of A }`.
pub fn minsp(a: &SymMatrix) -> Result<f64> {
    Ok(eigh(a)?.minsp())
}

/// `|A|⁻¹ b`, the Newton step with its negative-curvature part reflected.
pub fn reflected_solve(a: &SymMatrix, b: &DVector<f64>) -> Result<DVector<f64>> {
    eigh(a)?.reflected_solve(b)
}

/// True iff the largest eigenvalue of `m` is below `-tol`.
pub fn is_negative_definite(m: &SymMatrix, tol: f64) -> Result<bool> {
    Ok(eigh(m)?.max_eigenvalue() < -tol)
}
