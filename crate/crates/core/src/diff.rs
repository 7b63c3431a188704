//! Analytic derivatives of the transport distances.
//!
//! The gradient of the EOT distance in the source points needs no linear
//! solve: it is the row-sum contraction of the weighted cost-derivative
//! tensor `B`. The Sinkhorn-distance gradient and the EOT Hessian both go
//! through the singular symmetric system built on
//!
//! ```text
//! H(Pi) = [ diag(Pi 1)   Pi          ]
//!         [ Pi^T         diag(Pi^T 1)]
//! ```
//!
//! whose pseudo-inverse is realized exclusively through the truncated
//! eigendecomposition solve of [`crate::tensor`] (no explicit inverse is
//! ever formed). All operations read the marginals off the coupling
//! itself, so they stay exact for early-stopped plans.
//!
//! Index conventions, fixed once:
//! - `B[[k, s, j]] = dC_kj/d(y_k)_s * Pi_kj`, shape `M x d x N`;
//! - `R` stacks `diag(B . 1_N)` over the first `M` slots and the
//!   index-permuted `B` over the remaining `N`: `R[[k, k, s]] = (B . 1)_ks`
//!   and `R[[M + j, k, s]] = B[[k, s, j]]`, shape `(M+N) x M x d`;
//! - the Hessian tensor `T` has shape `M x d x M x d` indexed
//!   `[k, t, s, l]`; flattened matrices use `(k, t) -> k * d + t`.

use ndarray::{Array1, Array2, Array3, Array4, Axis};

use crate::sinkhorn::{CostDerivatives, TransportPlan};
use crate::tensor::{DenseMatrix, Tensor3, Tensor4, TsvdSolver};
use crate::{Error, Result};

/// The symmetric block matrix governing the derivative linear systems.
///
/// Built from a coupling's own marginals; entrywise positivity of the
/// coupling is required so the kernel is exactly the span of
/// `q0 = (1_M, -1_N)`.
#[derive(Debug, Clone)]
pub struct HMatrix {
    matrix: DenseMatrix,
    m: usize,
    n: usize,
}

impl HMatrix {
    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> DenseMatrix {
        self.matrix
    }

    pub fn source_len(&self) -> usize {
        self.m
    }

    pub fn target_len(&self) -> usize {
        self.n
    }

    /// The kernel direction `q0 = (1_M, -1_N)`.
    pub fn kernel_vector(&self) -> Array1<f64> {
        let mut q = Array1::ones(self.m + self.n);
        for j in 0..self.n {
            q[self.m + j] = -1.0;
        }
        q
    }
}

/// Build `H` from a transport plan's coupling.
pub fn build_h(plan: &TransportPlan) -> Result<HMatrix> {
    build_h_from_coupling(&plan.coupling)
}

/// Build `H` from a raw entrywise-positive coupling.
pub fn build_h_from_coupling(coupling: &DenseMatrix) -> Result<HMatrix> {
    if coupling.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
        return Err(Error::ContractViolation(
            "coupling must be entrywise positive and finite".into(),
        ));
    }
    let (m, n) = coupling.dim();
    let row = coupling.sum_axis(Axis(1));
    let col = coupling.sum_axis(Axis(0));
    let mut h = Array2::zeros((m + n, m + n));
    for i in 0..m {
        h[[i, i]] = row[i];
    }
    for j in 0..n {
        h[[m + j, m + j]] = col[j];
    }
    for i in 0..m {
        for j in 0..n {
            h[[i, m + j]] = coupling[[i, j]];
            h[[m + j, i]] = coupling[[i, j]];
        }
    }
    Ok(HMatrix { matrix: h, m, n })
}

/// Weighted cost-derivative tensor `B` and stacked right-hand side `R`.
pub fn build_b_r(plan: &TransportPlan, dc: &Tensor3) -> Result<(Tensor3, Tensor3)> {
    let (m, n) = plan.coupling.dim();
    let (bm, d, bn) = dc.dim();
    if bm != m || bn != n {
        return Err(Error::ShapeMismatch(format!(
            "cost derivatives are {bm}x{d}x{bn} but coupling is {m}x{n}"
        )));
    }
    let mut b = Array3::zeros((m, d, n));
    for k in 0..m {
        for s in 0..d {
            for j in 0..n {
                b[[k, s, j]] = dc[[k, s, j]] * plan.coupling[[k, j]];
            }
        }
    }
    let mut r = Array3::zeros((m + n, m, d));
    for k in 0..m {
        for s in 0..d {
            let mut acc = 0.0;
            for j in 0..n {
                acc += b[[k, s, j]];
            }
            r[[k, k, s]] = acc;
        }
    }
    for j in 0..n {
        for k in 0..m {
            for s in 0..d {
                r[[m + j, k, s]] = b[[k, s, j]];
            }
        }
    }
    Ok((b, r))
}

/// Gradient of the EOT distance in the source points: `B . 1_N`.
///
/// No linear solve is involved; row `k` is `sum_j dC_kj/dy_k * Pi_kj`.
pub fn grad_eot(plan: &TransportPlan, dc: &Tensor3) -> Result<Array2<f64>> {
    let (m, n) = plan.coupling.dim();
    let (bm, d, bn) = dc.dim();
    if bm != m || bn != n {
        return Err(Error::ShapeMismatch(format!(
            "cost derivatives are {bm}x{d}x{bn} but coupling is {m}x{n}"
        )));
    }
    let mut grad = Array2::zeros((m, d));
    for k in 0..m {
        for s in 0..d {
            let mut acc = 0.0;
            for j in 0..n {
                acc += dc[[k, s, j]] * plan.coupling[[k, j]];
            }
            grad[[k, s]] = acc;
        }
    }
    Ok(grad)
}

/// Gradient of the EOT distance through the implicit-differentiation
/// route: solve `H X = R`, then contract the solution with the plan's
/// marginals. Agrees with [`grad_eot`] up to solver tolerance; kept as
/// the second algebraic route for cross-checks.
pub fn grad_eot_implicit(plan: &TransportPlan, dc: &Tensor3, alpha: f64) -> Result<Array2<f64>> {
    let (_, r) = build_b_r(plan, dc)?;
    let h = build_h(plan)?;
    let solver = TsvdSolver::new(h.matrix(), alpha)?;
    let sol = solver.solve_tensor3(&r)?;
    let mu = plan.row_marginals();
    let nu = plan.col_marginals();
    let (mn, m, d) = sol.dim();
    let mut grad = Array2::zeros((m, d));
    for k in 0..m {
        for s in 0..d {
            let mut acc = 0.0;
            for i in 0..mn {
                let w = if i < m { mu[i] } else { nu[i - m] };
                acc += w * sol[[i, k, s]];
            }
            grad[[k, s]] = acc;
        }
    }
    Ok(grad)
}

/// Gradient of the Sinkhorn distance (transport cost without the entropy
/// term): `(B - A/eps) . 1_N + (1/eps) r^T R` where `H r = (a; b)`.
pub fn grad_sinkhorn(
    plan: &TransportPlan,
    c: &DenseMatrix,
    dc: &Tensor3,
    alpha: f64,
) -> Result<Array2<f64>> {
    let (m, n) = plan.coupling.dim();
    if c.dim() != (m, n) {
        return Err(Error::ShapeMismatch(format!(
            "cost is {:?} but coupling is {m}x{n}",
            c.dim()
        )));
    }
    let (_, d, _) = dc.dim();
    let eps = plan.epsilon;
    let (_, r_tensor) = build_b_r(plan, dc)?;

    // a_i = sum_j C_ij Pi_ij, b_j = sum_i C_ij Pi_ij; (a; b) is orthogonal
    // to the kernel q0, so the system is solvable.
    let weighted = c * &plan.coupling;
    let a = weighted.sum_axis(Axis(1));
    let b_vec = weighted.sum_axis(Axis(0));
    let mut rhs = Array1::zeros(m + n);
    for i in 0..m {
        rhs[i] = a[i];
    }
    for j in 0..n {
        rhs[m + j] = b_vec[j];
    }

    let h = build_h(plan)?;
    let solver = TsvdSolver::new(h.matrix(), alpha)?;
    let r_sol = solver.solve_vector(&rhs)?;

    let mut grad = Array2::zeros((m, d));
    for k in 0..m {
        for s in 0..d {
            // (B - A/eps) . 1_N with A_ksj = dC_ksj * C_kj * Pi_kj
            let mut acc = 0.0;
            for j in 0..n {
                let pij = plan.coupling[[k, j]];
                acc += dc[[k, s, j]] * pij * (1.0 - c[[k, j]] / eps);
            }
            // (1/eps) r^T R for this (k, s) slice
            let mut rr = r_sol[k] * r_tensor[[k, k, s]];
            for j in 0..n {
                rr += r_sol[m + j] * r_tensor[[m + j, k, s]];
            }
            grad[[k, s]] = acc + rr / eps;
        }
    }
    Ok(grad)
}

/// Hessian of the EOT distance in the source points.
///
/// `T = (1/eps) R^T H_tsvd^{-1} R + E` with the diagonal blocks of `E`
/// given by `sum_j Pi_kj (d2C_kj - (1/eps) dC_kj dC_kj^T)`. Returns the
/// tensor together with the retained rank of the truncated solve.
pub fn hessian_eot(
    plan: &TransportPlan,
    derivs: &CostDerivatives,
    epsilon: f64,
    alpha: f64,
) -> Result<(Tensor4, usize)> {
    let h = build_h(plan)?;
    let solver = TsvdSolver::new(h.matrix(), alpha)?;
    hessian_eot_with_solver(plan, derivs, epsilon, &solver)
}

fn hessian_eot_with_solver(
    plan: &TransportPlan,
    derivs: &CostDerivatives,
    epsilon: f64,
    solver: &TsvdSolver,
) -> Result<(Tensor4, usize)> {
    if !(epsilon > 0.0) {
        return Err(Error::ContractViolation(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let (m, n) = plan.coupling.dim();
    let d = derivs.grad.dim().1;
    let (_, r) = build_b_r(plan, &derivs.grad)?;
    let r_flat = r
        .view()
        .into_shape((m + n, m * d))
        .map_err(|e| Error::ShapeMismatch(e.to_string()))?
        .to_owned();
    let sol = solver.solve_matrix(&r_flat)?;
    let mut t_flat = r_flat.t().dot(&sol);
    t_flat.mapv_inplace(|v| v / epsilon);
    let mut t = t_flat
        .into_shape((m, d, m, d))
        .map_err(|e| Error::ShapeMismatch(e.to_string()))?;

    // E: diagonal blocks only.
    for k in 0..m {
        let e_k = e_block(plan, derivs, epsilon, k, n, d);
        for t1 in 0..d {
            for l in 0..d {
                t[[k, t1, k, l]] += e_k[[t1, l]];
            }
        }
    }
    Ok((t, solver.retained_rank()))
}

/// Diagonal block `E_k = sum_j Pi_kj (d2C - (1/eps) dC dC^T)`.
fn e_block(
    plan: &TransportPlan,
    derivs: &CostDerivatives,
    epsilon: f64,
    k: usize,
    n: usize,
    d: usize,
) -> DenseMatrix {
    let mut e_k: DenseMatrix = Array2::zeros((d, d));
    let mut mass = 0.0;
    for j in 0..n {
        let pij = plan.coupling[[k, j]];
        mass += pij;
        for t1 in 0..d {
            for l in 0..d {
                e_k[[t1, l]] -= pij * derivs.grad[[k, t1, j]] * derivs.grad[[k, l, j]] / epsilon;
            }
        }
    }
    e_k.scaled_add(mass, &derivs.hess_block);
    e_k
}

/// Gradient, Hessian, and the intermediate tensors in one pass, sharing a
/// single eigendecomposition of `H`.
#[derive(Debug, Clone)]
pub struct DerivativeBundle {
    pub grad_y: Array2<f64>,
    pub hessian_y: Tensor4,
    pub b: Tensor3,
    pub r: Tensor3,
    pub e: Tensor4,
    pub retained_rank: usize,
}

/// Assemble the full derivative bundle for a plan.
pub fn derivative_bundle(
    plan: &TransportPlan,
    derivs: &CostDerivatives,
    epsilon: f64,
    alpha: f64,
) -> Result<DerivativeBundle> {
    let (m, n) = plan.coupling.dim();
    let d = derivs.grad.dim().1;
    let grad_y = grad_eot(plan, &derivs.grad)?;
    let (b, r) = build_b_r(plan, &derivs.grad)?;
    let h = build_h(plan)?;
    let solver = TsvdSolver::new(h.matrix(), alpha)?;
    let (hessian_y, retained_rank) = hessian_eot_with_solver(plan, derivs, epsilon, &solver)?;
    let mut e = Array4::zeros((m, d, m, d));
    for k in 0..m {
        let e_k = e_block(plan, derivs, epsilon, k, n, d);
        for t1 in 0..d {
            for l in 0..d {
                e[[k, t1, k, l]] = e_k[[t1, l]];
            }
        }
    }
    Ok(DerivativeBundle {
        grad_y,
        hessian_y,
        b,
        r,
        e,
        retained_rank,
    })
}

/// Marginal error of a Hessian tensor under squared-Euclidean cost.
///
/// For each `s`, the sum over the first point index must equal
/// `2 mu_s I_d`; the error accumulates squared off-diagonal entries and
/// squared diagonal deviations over all `s`. Success in the benchmarks
/// means `error < 0.1`.
pub fn marginal_error(t: &Tensor4, mu: &Array1<f64>) -> f64 {
    let (m, d, _, _) = t.dim();
    debug_assert_eq!(mu.len(), m);
    let mut error = 0.0;
    for s in 0..m {
        for t1 in 0..d {
            for l in 0..d {
                let mut col_sum = 0.0;
                for k in 0..m {
                    col_sum += t[[k, t1, s, l]];
                }
                if t1 == l {
                    let dev = col_sum - 2.0 * mu[s];
                    error += dev * dev;
                } else {
                    error += col_sum * col_sum;
                }
            }
        }
    }
    error
}

/// Gradient of the distance in the parameters of a linear model `Y = X theta`.
pub fn theta_gradient(x: &Array2<f64>, grad_y: &Array2<f64>) -> Result<Array2<f64>> {
    if x.nrows() != grad_y.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "X has {} rows but the gradient has {}",
            x.nrows(),
            grad_y.nrows()
        )));
    }
    Ok(x.t().dot(grad_y))
}

/// Gradient and Hessian in the parameters of a linear model `Y = X theta`.
///
/// The chain rule contracts both point indices of `T` with `X`:
/// `hess[(m, t), (n, l)] = sum_{k, s} X_km T_ktsl X_sn`, flattened with
/// `(m, t) -> m * d + t`. The second-order chain term vanishes because the
/// model is linear.
pub fn grad_hessian_theta(
    x: &Array2<f64>,
    grad_y: &Array2<f64>,
    t: &Tensor4,
) -> Result<(Array2<f64>, DenseMatrix)> {
    let (m, big_d) = x.dim();
    let (tm, d, ts, tl) = t.dim();
    if tm != m || ts != m {
        return Err(Error::ShapeMismatch(format!(
            "Hessian tensor is {tm}x{d}x{ts}x{tl} but X has {m} rows"
        )));
    }
    let grad_theta = theta_gradient(x, grad_y)?;

    // First contraction over k: A[(m1, t1), (s, l)] = sum_k X_km1 T_kt1sl.
    let t_flat = t
        .view()
        .into_shape((m * d, m * d))
        .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
    let mut hess = Array2::zeros((big_d * d, big_d * d));
    // X expanded over the coordinate index: XE[(k, t), (m1, t)] = X_km1.
    let mut x_expanded = Array2::zeros((m * d, big_d * d));
    for k in 0..m {
        for m1 in 0..big_d {
            for t1 in 0..d {
                x_expanded[[k * d + t1, m1 * d + t1]] = x[[k, m1]];
            }
        }
    }
    let half = x_expanded.t().dot(&t_flat); // (D d) x (M d)
    hess.assign(&half.dot(&x_expanded)); // (D d) x (D d)
    Ok((grad_theta, hess))
}

/// Parameter-space gradient and Hessian without materializing the full
/// point-space Hessian tensor.
///
/// Contracts `R` and `E` with `X` before the truncated solve, so the cost
/// scales with `D * d` right-hand sides instead of `M * d`. Agrees with
/// [`grad_hessian_theta`] applied to [`hessian_eot`]'s output.
pub fn theta_grad_hessian_projected(
    plan: &TransportPlan,
    derivs: &CostDerivatives,
    x: &Array2<f64>,
    epsilon: f64,
    alpha: f64,
) -> Result<(Array2<f64>, DenseMatrix, usize)> {
    let (m, n) = plan.coupling.dim();
    let (_, d, _) = derivs.grad.dim();
    let big_d = x.ncols();
    if x.nrows() != m {
        return Err(Error::ShapeMismatch(format!(
            "X has {} rows but the coupling has {m}",
            x.nrows()
        )));
    }

    let grad_y = grad_eot(plan, &derivs.grad)?;
    let grad_theta = theta_gradient(x, &grad_y)?;

    // Projected right-hand side: Rt[i, (m1, t)] = sum_k R[i, k, t] X[k, m1].
    let mut rt = Array2::zeros((m + n, big_d * d));
    // rows i < M: R[i, k, t] = delta_ik (B.1)_it
    for i in 0..m {
        for m1 in 0..big_d {
            for t1 in 0..d {
                rt[[i, m1 * d + t1]] = grad_y[[i, t1]] * x[[i, m1]];
            }
        }
    }
    // rows M + j: R[M+j, k, t] = B[k, t, j] = dC[k, t, j] Pi[k, j]
    for j in 0..n {
        for m1 in 0..big_d {
            for t1 in 0..d {
                let mut acc = 0.0;
                for k in 0..m {
                    acc += derivs.grad[[k, t1, j]] * plan.coupling[[k, j]] * x[[k, m1]];
                }
                rt[[m + j, m1 * d + t1]] = acc;
            }
        }
    }

    let h = build_h(plan)?;
    let solver = TsvdSolver::new(h.matrix(), alpha)?;
    let sol = solver.solve_matrix(&rt)?;
    let mut hess = rt.t().dot(&sol);
    hess.mapv_inplace(|v| v / epsilon);

    // Projected E: sum_k X_km1 X_kn1 E_k[t, l].
    for k in 0..m {
        let e_k = e_block(plan, derivs, epsilon, k, n, d);
        for m1 in 0..big_d {
            for n1 in 0..big_d {
                let w = x[[k, m1]] * x[[k, n1]];
                if w == 0.0 {
                    continue;
                }
                for t1 in 0..d {
                    for l in 0..d {
                        hess[[m1 * d + t1, n1 * d + l]] += w * e_k[[t1, l]];
                    }
                }
            }
        }
    }
    Ok((grad_theta, hess, solver.retained_rank()))
}
