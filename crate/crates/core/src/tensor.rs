//! Dense containers and the regularized symmetric solve.
//!
//! Everything downstream works on plain `ndarray` arrays in double
//! precision: `DenseMatrix` for matrices, `Tensor3`/`Tensor4` for the
//! higher-order derivative tensors. The one nontrivial primitive here is
//! [`TsvdSolver`], which applies a truncated eigendecomposition of a
//! symmetric positive-semidefinite matrix to one or many right-hand
//! sides. Truncation keeps the eigenvalues with `lambda_j / lambda_1 >
//! alpha` (all strictly positive ones when `alpha == 0`), which turns the
//! near-singular solves arising from small regularization strengths into
//! well-posed ones.

use ndarray::{Array1, Array2, Array3, Array4};

use crate::{Error, Result};

/// Row-major dense matrix of `f64`.
pub type DenseMatrix = Array2<f64>;
/// Third-order tensor of `f64`.
pub type Tensor3 = Array3<f64>;
/// Fourth-order tensor of `f64`.
pub type Tensor4 = Array4<f64>;

/// Relative tolerance accepted when checking symmetry of inputs.
const SYMMETRY_RTOL: f64 = 1e-12;

/// Spectral decomposition of a symmetric matrix.
///
/// Eigenvalues are sorted in descending order; `eigenvectors` holds the
/// matching orthonormal eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub eigenvalues: Array1<f64>,
    pub eigenvectors: DenseMatrix,
}

fn check_finite(m: &DenseMatrix, what: &str) -> Result<()> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("{what} contains non-finite entries")));
    }
    Ok(())
}

fn check_symmetric(h: &DenseMatrix) -> Result<()> {
    let n = h.nrows();
    if n != h.ncols() {
        return Err(Error::ContractViolation(format!(
            "expected a square matrix, got {}x{}",
            n,
            h.ncols()
        )));
    }
    let scale = h.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut dev = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            dev = dev.max((h[[i, j]] - h[[j, i]]).abs());
        }
    }
    if dev > SYMMETRY_RTOL * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::ContractViolation(format!(
            "matrix is not symmetric: max |H - H^T| = {dev:e} vs scale {scale:e}"
        )));
    }
    Ok(())
}

/// Full eigendecomposition of a symmetric matrix, eigenvalues descending.
///
/// For symmetric positive-semidefinite input this coincides with the
/// singular value decomposition, which is why it also backs the truncated
/// "SVD" solve below.
pub fn sym_eig(h: &DenseMatrix) -> Result<EigenDecomposition> {
    check_symmetric(h)?;
    check_finite(h, "sym_eig input")?;
    let n = h.nrows();

    // Symmetrize so the backend sees one consistent matrix regardless of
    // which triangle it reads.
    let hs = faer::Mat::from_fn(n, n, |i, j| 0.5 * (h[[i, j]] + h[[j, i]]));
    let evd = hs.selfadjoint_eigendecomposition(faer::Side::Lower);

    let raw_values = evd.s();
    let raw_vectors = evd.u();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let va = raw_values.column_vector().read(a);
        let vb = raw_values.column_vector().read(b);
        vb.partial_cmp(&va).expect("eigenvalues are finite")
    });

    let mut eigenvalues = Array1::zeros(n);
    let mut eigenvectors = Array2::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        eigenvalues[dst] = raw_values.column_vector().read(src);
        for i in 0..n {
            eigenvectors[[i, dst]] = raw_vectors.read(i, src);
        }
    }
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// Truncated eigendecomposition of a symmetric PSD matrix, reusable
/// across many right-hand sides.
#[derive(Debug, Clone)]
pub struct TsvdSolver {
    retained_vectors: DenseMatrix,
    retained_values: Array1<f64>,
    alpha: f64,
}

impl TsvdSolver {
    /// Decompose `h` and retain eigenvalues with `lambda_j / lambda_1 > alpha`.
    ///
    /// `alpha == 0` keeps every strictly positive eigenvalue. Fails when
    /// `lambda_1 <= 0` or when nothing survives truncation.
    pub fn new(h: &DenseMatrix, alpha: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::ContractViolation(format!(
                "tsvd threshold alpha must lie in [0, 1), got {alpha}"
            )));
        }
        let eig = sym_eig(h)?;
        Self::from_eig(eig, alpha)
    }

    /// Build from a precomputed decomposition.
    pub fn from_eig(eig: EigenDecomposition, alpha: f64) -> Result<Self> {
        let lambda_1 = eig.eigenvalues[0];
        if lambda_1 <= 0.0 {
            return Err(Error::DegenerateMatrix(format!(
                "largest eigenvalue is {lambda_1:e}; matrix is not PSD with positive range"
            )));
        }
        let k = eig
            .eigenvalues
            .iter()
            .take_while(|&&l| l > 0.0 && l > alpha * lambda_1)
            .count();
        if k == 0 {
            return Err(Error::RankZero(alpha));
        }
        let n = eig.eigenvalues.len();
        let mut retained_vectors = Array2::zeros((n, k));
        retained_vectors.assign(&eig.eigenvectors.slice(ndarray::s![.., ..k]));
        let retained_values = eig.eigenvalues.slice(ndarray::s![..k]).to_owned();
        Ok(Self {
            retained_vectors,
            retained_values,
            alpha,
        })
    }

    /// Number of retained eigenvalues.
    pub fn retained_rank(&self) -> usize {
        self.retained_values.len()
    }

    /// Truncation threshold this solver was built with.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Dimension of the decomposed matrix.
    pub fn dim(&self) -> usize {
        self.retained_vectors.nrows()
    }

    /// Apply `U_K Lambda_K^{-1} U_K^T` to a matrix of right-hand sides.
    pub fn solve_matrix(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if rhs.nrows() != self.dim() {
            return Err(Error::ShapeMismatch(format!(
                "rhs leading dimension {} does not match matrix dimension {}",
                rhs.nrows(),
                self.dim()
            )));
        }
        let mut projected = self.retained_vectors.t().dot(rhs);
        for (mut row, &l) in projected.outer_iter_mut().zip(self.retained_values.iter()) {
            row.mapv_inplace(|v| v / l);
        }
        Ok(self.retained_vectors.dot(&projected))
    }

    /// Apply the truncated inverse to a single vector.
    pub fn solve_vector(&self, rhs: &Array1<f64>) -> Result<Array1<f64>> {
        let m = rhs
            .view()
            .into_shape((rhs.len(), 1))
            .map_err(|e| Error::ShapeMismatch(e.to_string()))?
            .to_owned();
        let sol = self.solve_matrix(&m)?;
        Ok(sol.column(0).to_owned())
    }

    /// Apply the truncated inverse slice-wise over the trailing dimensions
    /// of a third-order right-hand side.
    pub fn solve_tensor3(&self, rhs: &Tensor3) -> Result<Tensor3> {
        let (n, a, b) = rhs.dim();
        let flat = rhs
            .view()
            .into_shape((n, a * b))
            .map_err(|e| Error::ShapeMismatch(e.to_string()))?
            .to_owned();
        let sol = self.solve_matrix(&flat)?;
        sol.into_shape((n, a, b))
            .map_err(|e| Error::ShapeMismatch(e.to_string()))
    }
}

/// One-shot truncated solve with a matrix right-hand side.
///
/// Returns the solution together with the retained rank `K`.
pub fn tsvd_solve(h: &DenseMatrix, rhs: &DenseMatrix, alpha: f64) -> Result<(DenseMatrix, usize)> {
    let solver = TsvdSolver::new(h, alpha)?;
    let sol = solver.solve_matrix(rhs)?;
    Ok((sol, solver.retained_rank()))
}

/// One-shot truncated solve with a third-order right-hand side.
pub fn tsvd_solve_tensor3(h: &DenseMatrix, rhs: &Tensor3, alpha: f64) -> Result<(Tensor3, usize)> {
    let solver = TsvdSolver::new(h, alpha)?;
    let sol = solver.solve_tensor3(rhs)?;
    Ok((sol, solver.retained_rank()))
}
