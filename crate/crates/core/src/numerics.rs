//! Dense symmetric PSD linear algebra shared by every other module.
//!
//! Symmetric eigendecomposition is the canonical factorization. Cholesky is
//! used only where a shifted system is solved repeatedly against the same
//! matrix ([`ShiftedInverse`]).

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{input, Error, Result};

/// Relative tolerance used by PSD order checks when the caller has no opinion.
pub const DEFAULT_PSD_TOL: f64 = 1e-8;

/// Largest asymmetry absorbed by symmetrization, relative to `max(1, max|a_ij|)`.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Returns `(A + Aᵀ)/2`, or an input error if `A` is visibly non-symmetric.
pub fn symmetrized(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !a.is_square() {
        return input(format!(
            "matrix is {}x{}, expected square",
            a.nrows(),
            a.ncols()
        ));
    }
    let scale = a.amax().max(1.0);
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    if worst > SYMMETRY_TOL * scale {
        return input(format!("matrix is not symmetric (max asymmetry {worst:e})"));
    }
    Ok((a + a.transpose()) * 0.5)
}

/// Eigenvalues in descending order with matching orthonormal eigenvectors
/// (column `j` of `eigenvectors` pairs with `eigenvalues[j]`).
#[derive(Debug, Clone)]
pub struct EigPair {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl EigPair {
    pub fn of(a: &DMatrix<f64>) -> Result<Self> {
        let sym = symmetrized(a)?;
        let n = sym.nrows();
        if n == 0 {
            return Ok(EigPair {
                eigenvalues: Vec::new(),
                eigenvectors: DMatrix::zeros(0, 0),
            });
        }
        let eig = SymmetricEigen::new(sym);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let eigenvectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
        Ok(EigPair {
            eigenvalues,
            eigenvectors,
        })
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    /// `U f(Λ) Uᵀ`
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let u = &self.eigenvectors;
        let mut scaled = u.clone();
        for (j, &l) in self.eigenvalues.iter().enumerate() {
            scaled.column_mut(j).scale_mut(f(l));
        }
        scaled * u.transpose()
    }
}

/// Solves `(A + ridge·I) X = B` through the eigendecomposition of `A`.
pub fn regularized_solve(a: &DMatrix<f64>, ridge: f64, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !(ridge.is_finite() && ridge > 0.0) {
        return input(format!("ridge must be positive, got {ridge}"));
    }
    if a.nrows() != b.nrows() {
        return input(format!(
            "right-hand side has {} rows, matrix has {}",
            b.nrows(),
            a.nrows()
        ));
    }
    let eig = EigPair::of(a)?;
    if let Some(&bad) = eig.eigenvalues.iter().find(|&&l| l + ridge <= 0.0) {
        return Err(Error::Numerical(format!(
            "shifted eigenvalue {bad} + {ridge} is not positive"
        )));
    }
    let u = &eig.eigenvectors;
    let mut coeffs = u.transpose() * b;
    for (j, &l) in eig.eigenvalues.iter().enumerate() {
        coeffs.row_mut(j).scale_mut(1.0 / (l + ridge));
    }
    Ok(u * coeffs)
}

/// Vector form of [`regularized_solve`].
pub fn regularized_solve_vec(
    a: &DMatrix<f64>,
    ridge: f64,
    b: &DVector<f64>,
) -> Result<DVector<f64>> {
    let x = regularized_solve(
        a,
        ridge,
        &DMatrix::from_column_slice(b.len(), 1, b.as_slice()),
    )?;
    Ok(x.column(0).into_owned())
}

/// `A ⪯ B` within tolerance: `λ_min(B − A) ≥ −tol·max(1, ‖B − A‖₂)`.
pub fn psd_order_check(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> Result<bool> {
    if a.shape() != b.shape() {
        return input(format!("shape mismatch {:?} vs {:?}", a.shape(), b.shape()));
    }
    let eig = EigPair::of(&(b - a))?;
    if eig.is_empty() {
        return Ok(true);
    }
    let norm = eig.max().abs().max(eig.min().abs());
    Ok(eig.min() >= -tol * norm.max(1.0))
}

/// Largest absolute eigenvalue of a symmetric matrix.
pub fn spectral_norm(a: &DMatrix<f64>) -> Result<f64> {
    let eig = EigPair::of(a)?;
    Ok(eig.max().abs().max(eig.min().abs()))
}

/// Largest eigenvalue of a symmetric matrix (0 for an empty matrix).
pub fn lambda_max(a: &DMatrix<f64>) -> Result<f64> {
    Ok(EigPair::of(a)?.max())
}

/// A quadratic form `v ↦ vᵀ M v` for some implicitly represented `M`.
pub trait QuadForm {
    fn dim(&self) -> usize;
    fn quad(&self, v: &DVector<f64>) -> f64;
}

/// `(A + shift·I)⁻¹` for a PSD `A`, ready to apply to many vectors.
///
/// `A` is either held densely or as the low-rank product `C M⁻¹ Cᵀ`, in
/// which case `(C M⁻¹ Cᵀ + sI)⁻¹ v = (v − C (sM + CᵀC)⁻¹ Cᵀ v) / s` and only
/// a `Q×Q` system is factored.
pub struct ShiftedInverse {
    shift: f64,
    kind: ShiftedKind,
}

enum ShiftedKind {
    Dense(Cholesky<f64, Dyn>),
    LowRank {
        c: DMatrix<f64>,
        inner: Option<Cholesky<f64, Dyn>>,
    },
}

impl ShiftedInverse {
    pub fn dense(a: &DMatrix<f64>, shift: f64) -> Result<Self> {
        check_shift(shift)?;
        let sym = symmetrized(a)?;
        let n = sym.nrows();
        let m = sym + DMatrix::identity(n, n) * shift;
        let chol = Cholesky::new(m)
            .ok_or_else(|| Error::Numerical(format!("A + {shift}·I is not positive definite")))?;
        Ok(ShiftedInverse {
            shift,
            kind: ShiftedKind::Dense(chol),
        })
    }

    /// `A = C M⁻¹ Cᵀ` with `C` of shape `r×q` and `M` a `q×q` positive definite matrix.
    pub fn low_rank(c: DMatrix<f64>, m: &DMatrix<f64>, shift: f64) -> Result<Self> {
        check_shift(shift)?;
        if m.nrows() != c.ncols() || !m.is_square() {
            return input(format!(
                "inner matrix {:?} does not match factor {:?}",
                m.shape(),
                c.shape()
            ));
        }
        let inner = if c.ncols() == 0 {
            None
        } else {
            let sys = symmetrized(&(m * shift + c.transpose() * &c))?;
            Some(Cholesky::new(sys).ok_or_else(|| {
                Error::Numerical("low-rank inner system is not positive definite".into())
            })?)
        };
        Ok(ShiftedInverse {
            shift,
            kind: ShiftedKind::LowRank { c, inner },
        })
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// `(A + sI)⁻¹ B`, column by column.
    pub fn apply_matrix(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        match &self.kind {
            ShiftedKind::Dense(chol) => chol.solve(b),
            ShiftedKind::LowRank { c, inner } => match inner {
                None => b / self.shift,
                Some(chol) => {
                    let proj = chol.solve(&(c.transpose() * b));
                    (b - c * proj) / self.shift
                }
            },
        }
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        match &self.kind {
            ShiftedKind::Dense(chol) => chol.solve(v),
            ShiftedKind::LowRank { c, inner } => match inner {
                None => v / self.shift,
                Some(chol) => {
                    let proj = chol.solve(&(c.transpose() * v));
                    (v - c * proj) / self.shift
                }
            },
        }
    }
}

impl QuadForm for ShiftedInverse {
    fn dim(&self) -> usize {
        match &self.kind {
            ShiftedKind::Dense(chol) => chol.l_dirty().nrows(),
            ShiftedKind::LowRank { c, .. } => c.nrows(),
        }
    }

    fn quad(&self, v: &DVector<f64>) -> f64 {
        v.dot(&self.apply(v))
    }
}

fn check_shift(shift: f64) -> Result<()> {
    if !(shift.is_finite() && shift > 0.0) {
        return input(format!("shift must be positive, got {shift}"));
    }
    Ok(())
}

/// Inverse of the bordered matrix `[[A, b], [bᵀ, d]] + sI` expressed through
/// an existing `(A + sI)⁻¹` and the Schur complement `d + s − bᵀ(A + sI)⁻¹b`.
pub struct BorderedInverse<'a> {
    base: &'a ShiftedInverse,
    border: DVector<f64>,
    base_border: DVector<f64>,
    schur: f64,
}

impl<'a> BorderedInverse<'a> {
    pub fn new(base: &'a ShiftedInverse, border: DVector<f64>, corner: f64) -> Result<Self> {
        if border.len() != base.dim() {
            return input(format!(
                "border has length {}, base matrix has dimension {}",
                border.len(),
                base.dim()
            ));
        }
        let base_border = base.apply(&border);
        let schur = corner + base.shift() - border.dot(&base_border);
        if !(schur > 0.0) {
            return Err(Error::Numerical(format!(
                "bordered Schur complement {schur} is not positive"
            )));
        }
        Ok(BorderedInverse {
            base,
            border,
            base_border,
            schur,
        })
    }

    pub fn schur(&self) -> f64 {
        self.schur
    }

    pub fn border(&self) -> &DVector<f64> {
        &self.border
    }

    /// Quadratic forms of every column of `v` (bordered coordinate in the last row).
    pub fn quad_many(&self, v: &DMatrix<f64>) -> Result<Vec<f64>> {
        let r = self.border.len();
        if v.nrows() != r + 1 {
            return input(format!(
                "vectors have length {}, expected {}",
                v.nrows(),
                r + 1
            ));
        }
        let head = v.rows(0, r).into_owned();
        let solved = self.base.apply_matrix(&head);
        Ok((0..v.ncols())
            .map(|j| {
                let inner = head.column(j).dot(&solved.column(j));
                let coupled = v[(r, j)] - self.base_border.dot(&head.column(j));
                inner + coupled * coupled / self.schur
            })
            .collect())
    }
}

impl QuadForm for BorderedInverse<'_> {
    fn dim(&self) -> usize {
        self.border.len() + 1
    }

    /// `v` has the bordered coordinate last.
    fn quad(&self, v: &DVector<f64>) -> f64 {
        let r = self.border.len();
        let head = v.rows(0, r).into_owned();
        let tail = v[r];
        let inner = self.base.quad(&head);
        let coupled = tail - self.base_border.dot(&head);
        inner + coupled * coupled / self.schur
    }
}

impl QuadForm for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn quad(&self, v: &DVector<f64>) -> f64 {
        v.dot(&(self * v))
    }
}
