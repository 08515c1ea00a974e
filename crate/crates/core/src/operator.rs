//! Dense linear operators and their singular system.
//!
//! All shifted inverses `T_a⁻¹ = (AᵀA + aI)⁻¹` and `Q_a⁻¹ = (AAᵀ + aI)⁻¹` are
//! applied as spectral filters on a factorization computed once per operator.

use nalgebra::{DMatrix, DVector};

use crate::error::{DsmError, Result};

/// Relative rank threshold used when no explicit tolerance is given.
pub const DEFAULT_RANK_FACTOR: f64 = 1e-12;

const MAX_JACOBI_SWEEPS: usize = 100;

/// A real `m × n` matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    entries: DMatrix<f64>,
}

impl DenseOperator {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() == 0 || entries.ncols() == 0 {
            return Err(DsmError::InvalidInput(format!(
                "operator must have at least one row and column, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if let Some(pos) = entries.iter().position(|x| !x.is_finite()) {
            return Err(DsmError::InvalidInput(format!(
                "non-finite entry at column-major index {pos}"
            )));
        }
        Ok(Self { entries })
    }

    pub fn from_row_slice(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(DsmError::InvalidInput(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                data.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(rows, cols, data))
    }

    pub fn rows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn cols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.entries
    }

    /// `A x`
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.entries * x
    }

    /// `A* y`, the transpose in the real setting.
    pub fn apply_adjoint(&self, y: &DVector<f64>) -> DVector<f64> {
        self.entries.tr_mul(y)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.norm()
    }
}

/// Full singular system `A = U Σ Vᵀ` with square orthogonal `U` (m×m) and `V` (n×n).
///
/// The eigenvalues of `Q = AAᵀ` are `σᵢ²` for `i < min(m, n)` and zero for the
/// remaining left vectors; likewise for `T = AᵀA` with the right vectors.
#[derive(Debug, Clone)]
pub struct SpectralFactorization {
    operator: DenseOperator,
    left: DMatrix<f64>,
    singular_values: Vec<f64>,
    right: DMatrix<f64>,
    rank_tolerance: f64,
    rank: usize,
}

impl SpectralFactorization {
    /// Factorizes `op` by one-sided Jacobi rotations. Singular values
    /// `σᵢ ≤ rank_tolerance` are treated as exact zeros by the projectors and the
    /// minimal-norm solution.
    pub fn factorize(op: DenseOperator, rank_tolerance: f64) -> Result<Self> {
        if !(rank_tolerance >= 0.0) || !rank_tolerance.is_finite() {
            return Err(DsmError::InvalidInput(format!(
                "rank tolerance must be finite and nonnegative, got {rank_tolerance}"
            )));
        }
        let (left, singular_values, right) = full_svd(op.matrix())?;
        let rank = singular_values
            .iter()
            .take_while(|&&s| s > rank_tolerance)
            .count();
        Ok(Self {
            operator: op,
            left,
            singular_values,
            right,
            rank_tolerance,
            rank,
        })
    }

    /// Factorizes with `rank_tolerance = 1e-12 · σ₁`.
    pub fn factorize_default(op: DenseOperator) -> Result<Self> {
        let mut fact = Self::factorize(op, 0.0)?;
        let tol = DEFAULT_RANK_FACTOR * fact.sigma_max();
        fact.rank_tolerance = tol;
        fact.rank = fact
            .singular_values
            .iter()
            .take_while(|&&s| s > tol)
            .count();
        Ok(fact)
    }

    pub fn operator(&self) -> &DenseOperator {
        &self.operator
    }

    pub fn rows(&self) -> usize {
        self.left.nrows()
    }

    pub fn cols(&self) -> usize {
        self.right.nrows()
    }

    pub fn left_vectors(&self) -> &DMatrix<f64> {
        &self.left
    }

    pub fn right_vectors(&self) -> &DMatrix<f64> {
        &self.right
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn rank_tolerance(&self) -> f64 {
        self.rank_tolerance
    }

    /// Number of singular values above the rank tolerance.
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn sigma_max(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }

    /// `‖Q‖ = σ₁²`, the upper end of the spectrum of both `Q` and `T`.
    pub fn spectral_bound(&self) -> f64 {
        self.sigma_max().powi(2)
    }

    /// Eigenvalue of `Q` attached to left vector `i`.
    pub fn gram_eigenvalue(&self, i: usize) -> f64 {
        self.singular_values.get(i).map_or(0.0, |s| s * s)
    }

    /// Coordinates `Uᵀg` of a data-space vector.
    pub fn data_coefficients(&self, g: &DVector<f64>) -> DVector<f64> {
        self.check_data_len(g);
        self.left.tr_mul(g)
    }

    /// Coordinates `Vᵀx` of a solution-space vector.
    pub fn solution_coefficients(&self, x: &DVector<f64>) -> DVector<f64> {
        self.check_solution_len(x);
        self.right.tr_mul(x)
    }

    /// `Q_a⁻¹ g = Σ (uᵢᵀg)/(σᵢ² + a) uᵢ`, with weight `1/a` on `N(Q)`.
    pub fn gram_shifted_inverse_apply(&self, a: f64, g: &DVector<f64>) -> Result<DVector<f64>> {
        check_shift(a)?;
        let mut coeffs = self.data_coefficients(g);
        for (i, c) in coeffs.iter_mut().enumerate() {
            *c /= self.gram_eigenvalue(i) + a;
        }
        Ok(&self.left * coeffs)
    }

    /// `T_a⁻¹ A* f = Σ σᵢ (uᵢᵀf)/(σᵢ² + a) vᵢ`.
    pub fn regularized_solution(&self, a: f64, f: &DVector<f64>) -> Result<DVector<f64>> {
        check_shift(a)?;
        let coeffs = self.data_coefficients(f);
        Ok(self.synthesize(|i, s| s * coeffs[i] / (s * s + a)))
    }

    /// `Pf`: the component of `f` in `N(A*)`, i.e. along left vectors whose
    /// singular value is at or below the rank tolerance.
    pub fn null_projection(&self, f: &DVector<f64>) -> DVector<f64> {
        let mut coeffs = self.data_coefficients(f);
        coeffs.rows_mut(0, self.rank).fill(0.0);
        &self.left * coeffs
    }

    /// `𝒫x`: the component of `x` in `N(A)`.
    pub fn solution_null_projection(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut coeffs = self.solution_coefficients(x);
        coeffs.rows_mut(0, self.rank).fill(0.0);
        &self.right * coeffs
    }

    /// `x − 𝒫x`: the component of `x` in `R(A*) = N(A)^⊥`.
    pub fn solution_range_projection(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut coeffs = self.solution_coefficients(x);
        let n = coeffs.len();
        coeffs.rows_mut(self.rank, n - self.rank).fill(0.0);
        &self.right * coeffs
    }

    /// Pseudoinverse `y = Σ_{σᵢ > tol} (uᵢᵀf)/σᵢ vᵢ`. For inconsistent `f` this is
    /// the minimal-norm least-squares solution.
    pub fn minimal_norm_solution(&self, f: &DVector<f64>) -> DVector<f64> {
        let coeffs = self.data_coefficients(f);
        let rank = self.rank;
        self.synthesize(|i, s| if i < rank { coeffs[i] / s } else { 0.0 })
    }

    /// `Σ_{i < min(m,n)} weight(i, σᵢ) vᵢ`.
    pub(crate) fn synthesize<F>(&self, weight: F) -> DVector<f64>
    where
        F: Fn(usize, f64) -> f64,
    {
        let n = self.cols();
        let mut coeffs = DVector::zeros(n);
        for (i, &s) in self.singular_values.iter().enumerate() {
            coeffs[i] = weight(i, s);
        }
        &self.right * coeffs
    }

    fn check_data_len(&self, g: &DVector<f64>) {
        assert_eq!(g.len(), self.rows(), "data vector length must equal m");
    }

    fn check_solution_len(&self, x: &DVector<f64>) {
        assert_eq!(x.len(), self.cols(), "solution vector length must equal n");
    }
}

fn check_shift(a: f64) -> Result<()> {
    if a > 0.0 && a.is_finite() {
        Ok(())
    } else {
        Err(DsmError::Domain(format!(
            "regularization parameter must be positive, got {a}"
        )))
    }
}

/// Full SVD with sorted singular values. Works on the transpose for wide matrices.
fn full_svd(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>, DMatrix<f64>)> {
    if a.nrows() >= a.ncols() {
        tall_svd(a)
    } else {
        let (u, s, v) = tall_svd(&a.transpose())?;
        Ok((v, s, u))
    }
}

/// Hestenes one-sided Jacobi for `m ≥ n`: rotate columns of `A` until mutually
/// orthogonal, so that `A V = W` with `W`'s column norms the singular values.
fn tall_svd(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>, DMatrix<f64>)> {
    let (m, n) = a.shape();
    let mut w = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let tol = (m as f64) * f64::EPSILON;

    let mut converged = n < 2;
    for _ in 0..MAX_JACOBI_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let alpha = w.column(p).norm_squared();
                let beta = w.column(q).norm_squared();
                let gamma = w.column(p).dot(&w.column(q));
                if gamma == 0.0 || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + 1.0f64.hypot(zeta));
                let c = 1.0 / 1.0f64.hypot(t);
                let s = c * t;
                rotate_columns(&mut w, p, q, c, s);
                rotate_columns(&mut v, p, q, c, s);
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(DsmError::Accuracy(format!(
            "Jacobi SVD did not converge in {MAX_JACOBI_SWEEPS} sweeps"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = (0..n).map(|j| w.column(j).norm()).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));

    let tiny = f64::MIN_POSITIVE.sqrt();
    let mut sigma = Vec::with_capacity(n);
    let mut right = DMatrix::zeros(n, n);
    let mut known: Vec<DVector<f64>> = Vec::with_capacity(m);
    let mut missing = Vec::new();
    for (k, &j) in order.iter().enumerate() {
        sigma.push(norms[j]);
        right.set_column(k, &v.column(j));
        if norms[j] > tiny {
            known.push(w.column(j) / norms[j]);
        } else {
            missing.push(k);
        }
    }

    // Left vectors of (numerically) zero singular values and of the m − n
    // complement come from an orthonormal completion.
    let completion = orthonormal_completion(&known, m);
    let mut left = DMatrix::zeros(m, m);
    let mut extra = completion.into_iter();
    let mut known = known.into_iter();
    for k in 0..m {
        let col = if k < n && !missing.contains(&k) {
            known.next()
        } else {
            extra.next()
        }
        .expect("completion yields exactly m columns");
        left.set_column(k, &col);
    }
    Ok((left, sigma, right))
}

fn rotate_columns(mat: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64) {
    for k in 0..mat.nrows() {
        let xp = mat[(k, p)];
        let xq = mat[(k, q)];
        mat[(k, p)] = c * xp - s * xq;
        mat[(k, q)] = s * xp + c * xq;
    }
}

/// Extends the orthonormal set `basis` to an orthonormal basis of `R^dim`,
/// returning only the added vectors.
fn orthonormal_completion(basis: &[DVector<f64>], dim: usize) -> Vec<DVector<f64>> {
    let mut all: Vec<DVector<f64>> = basis.to_vec();
    let mut added = Vec::new();
    while all.len() < dim {
        // Pick the coordinate axis with the largest residual against the span.
        let mut best: Option<(f64, DVector<f64>)> = None;
        for i in 0..dim {
            let mut r = DVector::zeros(dim);
            r[i] = 1.0;
            for _ in 0..2 {
                for q in &all {
                    let proj = q.dot(&r);
                    r.axpy(-proj, q, 1.0);
                }
            }
            let norm = r.norm();
            if best.as_ref().is_none_or(|(b, _)| norm > *b) {
                best = Some((norm, r));
            }
        }
        let (norm, r) = best.expect("dim > 0");
        let q = r / norm;
        all.push(q.clone());
        added.push(q);
    }
    added
}
