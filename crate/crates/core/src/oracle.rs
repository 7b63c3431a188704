//! Independent verification oracles.
//!
//! Central finite differences for gradients and Hessians, plus a
//! brute-force Moore-Penrose application backed by a hand-rolled cyclic
//! Jacobi eigensolver. The Jacobi route shares no code with
//! [`crate::tensor::sym_eig`], so cross-checks between the two are
//! meaningful. Nothing in this module is called from production paths;
//! it exists for tests, the acceptance suite, and the `grad-check`
//! command.

use ndarray::{Array1, Array2, Array4};
use rayon::prelude::*;

use crate::tensor::{DenseMatrix, Tensor4};
use crate::{Error, Result};

/// Finite-difference scheme selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdScheme {
    Central,
}

/// Step size and scheme for the finite-difference oracles.
#[derive(Debug, Clone, Copy)]
pub struct FDConfig {
    pub step: f64,
    pub scheme: FdScheme,
    /// One round of Richardson extrapolation: combine steps h and h/2.
    pub richardson: bool,
}

impl FDConfig {
    pub fn new(step: f64) -> Self {
        Self {
            step,
            scheme: FdScheme::Central,
            richardson: false,
        }
    }
}

impl Default for FDConfig {
    fn default() -> Self {
        Self::new(1e-5)
    }
}

fn central<F: Fn(&Array2<f64>) -> f64 + Sync>(
    loss: &F,
    y: &Array2<f64>,
    k: usize,
    s: usize,
    h: f64,
) -> Result<f64> {
    let mut plus = y.clone();
    plus[[k, s]] += h;
    let mut minus = y.clone();
    minus[[k, s]] -= h;
    let fp = loss(&plus);
    let fm = loss(&minus);
    if !fp.is_finite() || !fm.is_finite() {
        return Err(Error::Numerical(format!(
            "loss is not finite at perturbed input ({k}, {s})"
        )));
    }
    Ok((fp - fm) / (2.0 * h))
}

/// Central-difference gradient of a scalar loss over an M x d array.
pub fn fd_gradient<F: Fn(&Array2<f64>) -> f64 + Sync>(
    loss: F,
    y: &Array2<f64>,
    cfg: &FDConfig,
) -> Result<Array2<f64>> {
    if cfg.step <= 0.0 {
        return Err(Error::ContractViolation(format!(
            "finite-difference step must be positive, got {}",
            cfg.step
        )));
    }
    let (m, d) = y.dim();
    let coords: Vec<(usize, usize)> = (0..m).flat_map(|k| (0..d).map(move |s| (k, s))).collect();
    let entries: Result<Vec<f64>> = coords
        .par_iter()
        .map(|&(k, s)| {
            let d1 = central(&loss, y, k, s, cfg.step)?;
            if cfg.richardson {
                let d2 = central(&loss, y, k, s, cfg.step / 2.0)?;
                Ok((4.0 * d2 - d1) / 3.0)
            } else {
                Ok(d1)
            }
        })
        .collect();
    let entries = entries?;
    let mut out = Array2::zeros((m, d));
    for (idx, &(k, s)) in coords.iter().enumerate() {
        out[[k, s]] = entries[idx];
    }
    Ok(out)
}

/// Central-difference Hessian obtained by differencing a gradient map.
///
/// `grad` returns the M x d gradient at a perturbed input; the output
/// tensor is indexed `[k, t, s, l]` for the second derivative in
/// `(y_k)_t` and `(y_s)_l`.
pub fn fd_hessian<G: Fn(&Array2<f64>) -> Array2<f64> + Sync>(
    grad: G,
    y: &Array2<f64>,
    cfg: &FDConfig,
) -> Result<Tensor4> {
    if cfg.step <= 0.0 {
        return Err(Error::ContractViolation(format!(
            "finite-difference step must be positive, got {}",
            cfg.step
        )));
    }
    let (m, d) = y.dim();
    let coords: Vec<(usize, usize)> = (0..m).flat_map(|s| (0..d).map(move |l| (s, l))).collect();
    let cols: Result<Vec<Array2<f64>>> = coords
        .par_iter()
        .map(|&(s, l)| {
            let diff = |h: f64| -> Result<Array2<f64>> {
                let mut plus = y.clone();
                plus[[s, l]] += h;
                let mut minus = y.clone();
                minus[[s, l]] -= h;
                let gp = grad(&plus);
                let gm = grad(&minus);
                if gp.iter().any(|v| !v.is_finite()) || gm.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Numerical(format!(
                        "gradient is not finite at perturbed input ({s}, {l})"
                    )));
                }
                Ok((gp - gm) / (2.0 * h))
            };
            let d1 = diff(cfg.step)?;
            if cfg.richardson {
                let d2 = diff(cfg.step / 2.0)?;
                Ok((d2.mapv(|v| 4.0 * v) - d1) / 3.0)
            } else {
                Ok(d1)
            }
        })
        .collect();
    let cols = cols?;
    let mut out = Array4::zeros((m, d, m, d));
    for (idx, &(s, l)) in coords.iter().enumerate() {
        for k in 0..m {
            for t in 0..d {
                out[[k, t, s, l]] = cols[idx][[k, t]];
            }
        }
    }
    Ok(out)
}

/// Dimension cap for the brute-force pseudo-inverse.
pub const PINV_SIZE_CAP: usize = 200;

/// Relative zero threshold for the pseudo-inverse spectrum.
const PINV_ZERO_RTOL: f64 = 1e-12;

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Deliberately naive and self-contained so it can cross-check the
/// production eigensolver. Returns eigenvalues in descending order with
/// matching eigenvector columns.
fn jacobi_eig(h: &DenseMatrix) -> (Array1<f64>, DenseMatrix) {
    let n = h.nrows();
    let mut a = h.clone();
    let mut q: DenseMatrix = Array2::eye(n);
    let frob = h.mapv(|v| v * v).sum().sqrt();
    let tol = 1e-15 * frob.max(f64::MIN_POSITIVE);

    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off = off.max(a[[i, j]].abs());
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..n {
            for r in (p + 1)..n {
                let apr = a[[p, r]];
                if apr.abs() <= tol {
                    continue;
                }
                let theta = (a[[r, r]] - a[[p, p]]) / (2.0 * apr);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[[k, p]];
                    let akr = a[[k, r]];
                    a[[k, p]] = c * akp - s * akr;
                    a[[k, r]] = s * akp + c * akr;
                }
                for k in 0..n {
                    let apk = a[[p, k]];
                    let ark = a[[r, k]];
                    a[[p, k]] = c * apk - s * ark;
                    a[[r, k]] = s * apk + c * ark;
                }
                for k in 0..n {
                    let qkp = q[[k, p]];
                    let qkr = q[[k, r]];
                    q[[k, p]] = c * qkp - s * qkr;
                    q[[k, r]] = s * qkp + c * qkr;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[[y, y]].partial_cmp(&a[[x, x]]).unwrap());
    let mut values = Array1::zeros(n);
    let mut vectors = Array2::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = a[[src, src]];
        for i in 0..n {
            vectors[[i, dst]] = q[[i, src]];
        }
    }
    (values, vectors)
}

/// Full-spectrum Moore-Penrose application for small symmetric PSD
/// matrices, with zero threshold `1e-12 * lambda_1`.
pub fn dense_pinv_apply(h: &DenseMatrix, rhs: &DenseMatrix) -> Result<DenseMatrix> {
    let n = h.nrows();
    if n != h.ncols() {
        return Err(Error::ContractViolation(format!(
            "expected a square matrix, got {}x{}",
            n,
            h.ncols()
        )));
    }
    if n > PINV_SIZE_CAP {
        return Err(Error::SizeCap(n, PINV_SIZE_CAP));
    }
    if rhs.nrows() != n {
        return Err(Error::ShapeMismatch(format!(
            "rhs has {} rows, expected {}",
            rhs.nrows(),
            n
        )));
    }
    let (values, vectors) = jacobi_eig(h);
    let lambda_1 = values[0];
    if lambda_1 <= 0.0 {
        return Err(Error::DegenerateMatrix(format!(
            "largest eigenvalue is {lambda_1:e}"
        )));
    }
    let thresh = PINV_ZERO_RTOL * lambda_1;
    let mut projected = vectors.t().dot(rhs);
    for (i, mut row) in projected.outer_iter_mut().enumerate() {
        if values[i] > thresh {
            let inv = 1.0 / values[i];
            row.mapv_inplace(|v| v * inv);
        } else {
            row.fill(0.0);
        }
    }
    Ok(vectors.dot(&projected))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn fd_gradient_of_squared_norm() {
        let y = array![[1.0, -2.0], [0.5, 3.0]];
        let grad = fd_gradient(|v| v.mapv(|x| x * x).sum(), &y, &FDConfig::default()).unwrap();
        for (g, v) in grad.iter().zip(y.iter()) {
            assert!((g - 2.0 * v).abs() < 1e-9);
        }
    }

    #[test]
    fn fd_halving_step_shrinks_error_quartically() {
        // f(x) = x^4 has third derivative 24x, so central differences have
        // error h^2 * 4x^3... the leading term scales as h^2.
        let y = array![[1.3]];
        let loss = |v: &Array2<f64>| v[[0, 0]].powi(4);
        let exact = 4.0 * 1.3f64.powi(3);
        let e1 = (fd_gradient(loss, &y, &FDConfig::new(1e-2)).unwrap()[[0, 0]] - exact).abs();
        let e2 = (fd_gradient(loss, &y, &FDConfig::new(5e-3)).unwrap()[[0, 0]] - exact).abs();
        let ratio = e1 / e2;
        assert!(
            (3.0..5.0).contains(&ratio),
            "expected ~4x error reduction, got {ratio}"
        );
    }

    #[test]
    fn fd_richardson_improves_accuracy() {
        let y = array![[1.3]];
        let loss = |v: &Array2<f64>| v[[0, 0]].powi(4);
        let exact = 4.0 * 1.3f64.powi(3);
        let plain = FDConfig::new(1e-3);
        let rich = FDConfig {
            richardson: true,
            ..plain
        };
        let ep = (fd_gradient(loss, &y, &plain).unwrap()[[0, 0]] - exact).abs();
        let er = (fd_gradient(loss, &y, &rich).unwrap()[[0, 0]] - exact).abs();
        assert!(er < ep);
    }

    #[test]
    fn fd_hessian_of_squared_norm_is_twice_identity() {
        let y = array![[0.2, -0.7], [1.1, 0.4]];
        let grad = |v: &Array2<f64>| v.mapv(|x| 2.0 * x);
        let t = fd_hessian(grad, &y, &FDConfig::new(1e-4)).unwrap();
        let (m, d) = y.dim();
        for k in 0..m {
            for t1 in 0..d {
                for s in 0..m {
                    for l in 0..d {
                        let expect = if k == s && t1 == l { 2.0 } else { 0.0 };
                        assert!((t[[k, t1, s, l]] - expect).abs() < 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn fd_rejects_non_finite_loss() {
        let y = array![[1.0]];
        let res = fd_gradient(|_| f64::NAN, &y, &FDConfig::default());
        assert!(matches!(res, Err(Error::Numerical(_))));
    }

    #[test]
    fn pinv_identity_returns_rhs() {
        let h = Array2::eye(3);
        let rhs = array![[1.0], [2.0], [3.0]];
        let sol = dense_pinv_apply(&h, &rhs).unwrap();
        for i in 0..3 {
            assert!((sol[[i, 0]] - rhs[[i, 0]]).abs() < 1e-12);
        }
    }

    #[test]
    fn pinv_range_condition() {
        // H with kernel q0 = (1, -1)/sqrt(2); rhs orthogonal to q0.
        let h = array![[1.0, 1.0], [1.0, 1.0]];
        let rhs = array![[2.0], [2.0]];
        let sol = dense_pinv_apply(&h, &rhs).unwrap();
        let back = h.dot(&sol);
        for i in 0..2 {
            assert!((back[[i, 0]] - rhs[[i, 0]]).abs() < 1e-10);
        }
    }

    #[test]
    fn pinv_size_cap_enforced() {
        let n = PINV_SIZE_CAP + 1;
        let h = Array2::eye(n);
        let rhs = Array2::zeros((n, 1));
        assert!(matches!(
            dense_pinv_apply(&h, &rhs),
            Err(Error::SizeCap(_, _))
        ));
    }

    #[test]
    fn jacobi_matches_known_spectrum() {
        let h = array![[4.0, 2.0, 2.0], [2.0, 3.0, 1.0], [2.0, 1.0, -3.0]];
        let (values, vectors) = jacobi_eig(&h);
        let expected = [6.092374950291167, 1.47313296881958, -3.565507919110752];
        for (v, e) in values.iter().zip(expected.iter()) {
            assert!((v - e).abs() < 1e-10, "eigenvalue {v} vs {e}");
        }
        // residual check H q = lambda q
        for j in 0..3 {
            let q = vectors.column(j).to_owned();
            let hq = h.dot(&q);
            for i in 0..3 {
                assert!((hq[i] - values[j] * q[i]).abs() < 1e-9);
            }
        }
    }
}
