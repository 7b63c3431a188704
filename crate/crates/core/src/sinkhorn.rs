//! Cost matrices and the log-domain Sinkhorn solver.
//!
//! The solver alternates the dual updates
//! `f <- eps log mu - eps log(K exp(g/eps))` and
//! `g <- eps log nu - eps log(K^T exp(f/eps))` starting from `g = 0`,
//! with every log-sum-exp evaluated through max subtraction. The kernel
//! `K = exp(-C/eps)` is never materialized on its own; couplings are
//! reconstructed entrywise from the shifted exponents, which stays stable
//! for small regularization strengths.
//!
//! Stored potentials follow the convention
//! `Pi_ij = mu_i nu_j exp((-C_ij + f_i + g_j)/eps)`, so the dual value of
//! the EOT distance is exactly `mu.f + nu.g`.
//!
//! Iteration stops at the first iterate whose 1-norm marginal violation
//! drops to the tolerance; otherwise the final iterate is returned with
//! `converged == false`. Early-stopped plans are fully usable downstream:
//! the derivative formulas stay exact for the plan's own marginals, which
//! is why consumers recompute `mu`/`nu` from the coupling instead of
//! trusting the requested ones.
//!
//! Row and column updates are parallelized per lane; each lane reduces
//! serially left to right, so results do not depend on the thread
//! schedule.

use ndarray::{Array1, Array2, Array3, Zip};

use crate::tensor::{DenseMatrix, Tensor3};
use crate::{Error, Result};

/// Weighted point set; weights are strictly positive and sum to one.
#[derive(Debug, Clone)]
pub struct PointCloud {
    points: Array2<f64>,
    weights: Array1<f64>,
}

impl PointCloud {
    pub fn new(points: Array2<f64>, weights: Array1<f64>) -> Result<Self> {
        if points.nrows() == 0 || points.ncols() == 0 {
            return Err(Error::ContractViolation(
                "point cloud must have at least one point and one coordinate".into(),
            ));
        }
        if points.nrows() != weights.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} points but {} weights",
                points.nrows(),
                weights.len()
            )));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("point coordinates must be finite".into()));
        }
        if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::ContractViolation(
                "weights must be strictly positive".into(),
            ));
        }
        let total: f64 = weights.sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::ContractViolation(format!(
                "weights must sum to 1 within 1e-12, got {total}"
            )));
        }
        Ok(Self { points, weights })
    }

    /// Uniformly weighted cloud.
    pub fn uniform(points: Array2<f64>) -> Result<Self> {
        let n = points.nrows();
        if n == 0 {
            return Err(Error::ContractViolation(
                "point cloud must have at least one point".into(),
            ));
        }
        let w = Array1::from_elem(n, 1.0 / n as f64);
        Self::new(points, w)
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn points(&self) -> &Array2<f64> {
        &self.points
    }

    pub fn weights(&self) -> &Array1<f64> {
        &self.weights
    }
}

/// Ground cost descriptor. Squared Euclidean is the default and the only
/// model with closed-form second derivatives wired through the Hessian
/// path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CostModel {
    #[default]
    SquaredEuclidean,
}

/// First and second derivatives of the cost entries in the source points.
///
/// `grad[[k, s, j]] = dC_kj / d(y_k)_s`. For the squared Euclidean model
/// the per-pair second-derivative block is the same `d x d` matrix
/// (`2 I_d`) for every `(k, j)`, stored once in `hess_block`.
#[derive(Debug, Clone)]
pub struct CostDerivatives {
    pub grad: Tensor3,
    pub hess_block: DenseMatrix,
}

/// Output of the Sinkhorn solver.
#[derive(Debug, Clone)]
pub struct TransportPlan {
    /// Optimal (or early-stopped) coupling, entrywise positive.
    pub coupling: DenseMatrix,
    /// Dual potential on the source side (convention of the coupling
    /// reconstruction above).
    pub f: Array1<f64>,
    /// Dual potential on the target side.
    pub g: Array1<f64>,
    /// Regularization strength the plan was solved with.
    pub epsilon: f64,
    /// Number of full (f, g) updates performed.
    pub iterations: usize,
    /// 1-norm marginal violation of the returned iterate.
    pub marginal_violation: f64,
    /// Whether the violation reached the requested tolerance.
    pub converged: bool,
    /// Per-iteration violation residuals, for diagnostics.
    pub violation_trace: Vec<f64>,
}

impl TransportPlan {
    /// Row sums of the coupling (the plan's own source marginals).
    pub fn row_marginals(&self) -> Array1<f64> {
        self.coupling.sum_axis(ndarray::Axis(1))
    }

    /// Column sums of the coupling (the plan's own target marginals).
    pub fn col_marginals(&self) -> Array1<f64> {
        self.coupling.sum_axis(ndarray::Axis(0))
    }
}

/// Cost matrix `C_ij = c(y_i, y*_j)` for the given model.
pub fn cost_matrix(y: &PointCloud, ystar: &PointCloud, model: CostModel) -> Result<DenseMatrix> {
    if y.dim() != ystar.dim() {
        return Err(Error::ShapeMismatch(format!(
            "ambient dimensions differ: {} vs {}",
            y.dim(),
            ystar.dim()
        )));
    }
    match model {
        CostModel::SquaredEuclidean => Ok(squared_euclidean(y.points(), ystar.points())),
    }
}

/// Squared Euclidean costs between two coordinate arrays.
pub fn squared_euclidean(y: &Array2<f64>, ystar: &Array2<f64>) -> DenseMatrix {
    let (m, d) = y.dim();
    let n = ystar.nrows();
    let mut c = Array2::zeros((m, n));
    for i in 0..m {
        let yi = y.row(i);
        for j in 0..n {
            let yj = ystar.row(j);
            let mut acc = 0.0;
            for s in 0..d {
                let diff = yi[s] - yj[s];
                acc += diff * diff;
            }
            c[[i, j]] = acc;
        }
    }
    c
}

/// First and second cost derivatives in the source points.
pub fn cost_derivatives(
    y: &PointCloud,
    ystar: &PointCloud,
    model: CostModel,
) -> Result<CostDerivatives> {
    if y.dim() != ystar.dim() {
        return Err(Error::ShapeMismatch(format!(
            "ambient dimensions differ: {} vs {}",
            y.dim(),
            ystar.dim()
        )));
    }
    match model {
        CostModel::SquaredEuclidean => {
            let (m, d) = y.points().dim();
            let n = ystar.len();
            let mut grad = Array3::zeros((m, d, n));
            for k in 0..m {
                for s in 0..d {
                    let yk = y.points()[[k, s]];
                    for j in 0..n {
                        grad[[k, s, j]] = 2.0 * (yk - ystar.points()[[j, s]]);
                    }
                }
            }
            let hess_block = Array2::from_diag(&Array1::from_elem(d, 2.0));
            Ok(CostDerivatives { grad, hess_block })
        }
    }
}

/// Log-sum-exp with running max subtraction over a lane described by an
/// accessor. Serial left-to-right reduction.
#[inline]
fn lse(len: usize, f: impl Fn(usize) -> f64) -> f64 {
    let mut max = f64::NEG_INFINITY;
    for i in 0..len {
        let v = f(i);
        if v > max {
            max = v;
        }
    }
    if !max.is_finite() {
        return max;
    }
    let mut sum = 0.0;
    for i in 0..len {
        sum += (f(i) - max).exp();
    }
    max + sum.ln()
}

/// Log-domain Sinkhorn iterations.
///
/// Returns the first iterate whose 1-norm marginal violation is at most
/// `tol`, or the `max_iter`-th iterate flagged as not converged.
pub fn sinkhorn_log(
    c: &DenseMatrix,
    mu: &Array1<f64>,
    nu: &Array1<f64>,
    epsilon: f64,
    tol: f64,
    max_iter: usize,
) -> Result<TransportPlan> {
    let (m, n) = c.dim();
    if mu.len() != m || nu.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "cost is {}x{} but marginals have lengths {} and {}",
            m,
            n,
            mu.len(),
            nu.len()
        )));
    }
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::ContractViolation(format!(
            "epsilon must be positive and finite, got {epsilon}"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::ContractViolation(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    if max_iter == 0 {
        return Err(Error::ContractViolation("max_iter must be at least 1".into()));
    }
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("cost matrix has non-finite entries".into()));
    }
    if mu.iter().chain(nu.iter()).any(|&w| !(w > 0.0) || !w.is_finite()) {
        return Err(Error::ContractViolation(
            "marginals must be strictly positive".into(),
        ));
    }

    // Work with exponent-scale quantities: phi = f/eps, gamma = g/eps,
    // kernel exponents C/eps (plus a transposed copy for column passes).
    let keps = c.mapv(|v| v / epsilon);
    let keps_t = keps.t().to_owned();
    let log_mu = mu.mapv(f64::ln);
    let log_nu = nu.mapv(f64::ln);

    let mut phi = Array1::<f64>::zeros(m);
    let mut gamma = Array1::<f64>::zeros(n);
    let mut row_sums = Array1::<f64>::zeros(m);
    let mut col_sums = Array1::<f64>::zeros(n);
    let mut violation_trace = Vec::new();
    let mut violation = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iter {
        iterations += 1;

        // phi_i = log mu_i - LSE_j(gamma_j - K_ij)
        Zip::from(&mut phi)
            .and(keps.rows())
            .and(&log_mu)
            .par_for_each(|p, krow, &lm| {
                let krow = krow.to_slice().expect("row-major cost");
                *p = lm - lse(n, |j| gamma[j] - krow[j]);
            });

        // gamma_j = log nu_j - LSE_i(phi_i - K_ij); in the same lane pass,
        // record the column sum of the refreshed coupling (it equals nu_j
        // up to rounding by construction).
        Zip::from(&mut gamma)
            .and(&mut col_sums)
            .and(keps_t.rows())
            .and(&log_nu)
            .par_for_each(|gm, cs, kcol, &ln| {
                let kcol = kcol.to_slice().expect("row-major transposed cost");
                let l = lse(m, |i| phi[i] - kcol[i]);
                *gm = ln - l;
                let mut sum = 0.0;
                for i in 0..m {
                    sum += (phi[i] + *gm - kcol[i]).exp();
                }
                *cs = sum;
            });

        // Row sums of the coupling with the refreshed gamma.
        Zip::from(&mut row_sums)
            .and(keps.rows())
            .and(&phi)
            .par_for_each(|rs, krow, &p| {
                let krow = krow.to_slice().expect("row-major cost");
                let mut sum = 0.0;
                for j in 0..n {
                    sum += (p + gamma[j] - krow[j]).exp();
                }
                *rs = sum;
            });

        let mut v = 0.0;
        for i in 0..m {
            v += (row_sums[i] - mu[i]).abs();
        }
        for j in 0..n {
            v += (col_sums[j] - nu[j]).abs();
        }
        if !v.is_finite()
            || phi.iter().any(|x| !x.is_finite())
            || gamma.iter().any(|x| !x.is_finite())
        {
            return Err(Error::Numerical(format!(
                "sinkhorn diverged at iteration {iterations} (violation = {v})"
            )));
        }
        violation = v;
        violation_trace.push(v);
        if v <= tol {
            converged = true;
            break;
        }
    }

    let mut coupling = Array2::zeros((m, n));
    Zip::from(coupling.rows_mut())
        .and(keps.rows())
        .and(&phi)
        .par_for_each(|mut prow, krow, &p| {
            let krow = krow.to_slice().expect("row-major cost");
            for j in 0..n {
                prow[j] = (p + gamma[j] - krow[j]).exp();
            }
        });

    // Convert to the potential convention of the coupling reconstruction
    // Pi_ij = mu_i nu_j exp((-C_ij + f_i + g_j)/eps).
    let f = Zip::from(&phi)
        .and(&log_mu)
        .map_collect(|&p, &lm| epsilon * (p - lm));
    let g = Zip::from(&gamma)
        .and(&log_nu)
        .map_collect(|&gm, &ln| epsilon * (gm - ln));

    Ok(TransportPlan {
        coupling,
        f,
        g,
        epsilon,
        iterations,
        marginal_violation: violation,
        converged,
        violation_trace,
    })
}

/// EOT distance as the dual value `mu.f + nu.g`.
///
/// For early-stopped plans pass the plan's own marginals to evaluate the
/// distance the formulas are exact for.
pub fn eot_distance(plan: &TransportPlan, mu: &Array1<f64>, nu: &Array1<f64>) -> f64 {
    mu.dot(&plan.f) + nu.dot(&plan.g)
}

/// Sinkhorn distance `sum_ij C_ij Pi_ij`: the transport cost of the
/// entropic plan with the entropy term left out.
pub fn sinkhorn_distance(c: &DenseMatrix, plan: &TransportPlan) -> f64 {
    debug_assert_eq!(c.dim(), plan.coupling.dim());
    let mut acc = 0.0;
    for (cv, pv) in c.iter().zip(plan.coupling.iter()) {
        acc += cv * pv;
    }
    acc
}

/// Primal EOT objective `sum C Pi + eps KL(Pi, mu x nu)`; used by tests
/// to confirm the dual value.
pub fn primal_objective(
    c: &DenseMatrix,
    coupling: &DenseMatrix,
    mu: &Array1<f64>,
    nu: &Array1<f64>,
    epsilon: f64,
) -> f64 {
    let mut cost = 0.0;
    let mut kl = 0.0;
    for ((i, j), &p) in coupling.indexed_iter() {
        cost += c[[i, j]] * p;
        if p > 0.0 {
            kl += p * (p / (mu[i] * nu[j])).ln();
        }
    }
    cost + epsilon * kl
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn plan_1x1(c11: f64, eps: f64) -> TransportPlan {
        let c = array![[c11]];
        let mu = array![1.0];
        let nu = array![1.0];
        sinkhorn_log(&c, &mu, &nu, eps, 1e-12, 100).unwrap()
    }

    #[test]
    fn cost_matrix_trivial_cases() {
        let zero = PointCloud::uniform(array![[0.0, 0.0]]).unwrap();
        let c = cost_matrix(&zero, &zero, CostModel::SquaredEuclidean).unwrap();
        assert_eq!(c[[0, 0]], 0.0);

        let y = PointCloud::uniform(array![[1.0, 0.0]]).unwrap();
        let c = cost_matrix(&y, &zero, CostModel::SquaredEuclidean).unwrap();
        assert_eq!(c[[0, 0]], 1.0);
    }

    #[test]
    fn cost_matrix_hand_computed() {
        let y = PointCloud::uniform(array![[0.0, 0.0], [1.0, 1.0]]).unwrap();
        let ys = PointCloud::uniform(array![[0.0, 1.0], [2.0, 0.0]]).unwrap();
        let c = cost_matrix(&y, &ys, CostModel::SquaredEuclidean).unwrap();
        let expect = array![[1.0, 4.0], [1.0, 2.0]];
        assert_eq!(c, expect);
    }

    #[test]
    fn cost_matrix_rejects_dimension_mismatch() {
        let y = PointCloud::uniform(array![[0.0, 0.0]]).unwrap();
        let ys = PointCloud::uniform(array![[0.0, 0.0, 0.0]]).unwrap();
        assert!(matches!(
            cost_matrix(&y, &ys, CostModel::SquaredEuclidean),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn cost_derivatives_closed_form() {
        let y = PointCloud::uniform(array![[1.0, 0.0]]).unwrap();
        let ys = PointCloud::uniform(array![[0.0, 0.0]]).unwrap();
        let d = cost_derivatives(&y, &ys, CostModel::SquaredEuclidean).unwrap();
        assert_eq!(d.grad[[0, 0, 0]], 2.0);
        assert_eq!(d.grad[[0, 1, 0]], 0.0);
        let expect = array![[2.0, 0.0], [0.0, 2.0]];
        assert_eq!(d.hess_block, expect);
    }

    #[test]
    fn cost_derivatives_match_finite_differences() {
        let yp = array![[0.3, -0.1], [0.9, 0.5], [0.2, 0.8]];
        let ysp = array![[0.0, 0.4], [1.0, -0.2]];
        let y = PointCloud::uniform(yp.clone()).unwrap();
        let ys = PointCloud::uniform(ysp.clone()).unwrap();
        let d = cost_derivatives(&y, &ys, CostModel::SquaredEuclidean).unwrap();
        let h = 1e-5;
        for k in 0..3 {
            for s in 0..2 {
                for j in 0..2 {
                    let mut plus = yp.clone();
                    plus[[k, s]] += h;
                    let mut minus = yp.clone();
                    minus[[k, s]] -= h;
                    let cp = squared_euclidean(&plus, &ysp);
                    let cm = squared_euclidean(&minus, &ysp);
                    let fd = (cp[[k, j]] - cm[[k, j]]) / (2.0 * h);
                    assert!(
                        (fd - d.grad[[k, s, j]]).abs() < 1e-6,
                        "fd {fd} vs analytic {}",
                        d.grad[[k, s, j]]
                    );
                }
            }
        }
    }

    #[test]
    fn single_point_plan() {
        let plan = plan_1x1(0.7, 0.3);
        assert_eq!(plan.iterations, 1);
        assert!((plan.coupling[[0, 0]] - 1.0).abs() < 1e-14);
        assert!((plan.f[0] + plan.g[0] - 0.7).abs() < 1e-12);
        assert!(plan.marginal_violation < 1e-14);
        assert!(plan.converged);
    }

    #[test]
    fn eot_distance_single_point_equals_cost() {
        let plan = plan_1x1(0.7, 0.3);
        let v = eot_distance(&plan, &array![1.0], &array![1.0]);
        assert!((v - 0.7).abs() < 1e-12);
    }

    #[test]
    fn sinkhorn_distance_single_point() {
        let c = array![[0.7]];
        let plan = plan_1x1(0.7, 0.3);
        assert!((sinkhorn_distance(&c, &plan) - 0.7).abs() < 1e-12);
    }

    #[test]
    fn sinkhorn_distance_is_definitional_cross_sum() {
        let c = array![[0.0, 1.0], [1.0, 0.5]];
        let mu = array![0.5, 0.5];
        let nu = array![0.25, 0.75];
        let plan = sinkhorn_log(&c, &mu, &nu, 0.2, 1e-11, 10_000).unwrap();
        let mut direct = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                direct += c[[i, j]] * plan.coupling[[i, j]];
            }
        }
        assert_eq!(sinkhorn_distance(&c, &plan), direct);
    }

    #[test]
    fn plan_invariants_random_instance() {
        let c = array![
            [0.0, 0.4, 1.1],
            [0.5, 0.1, 0.7],
            [1.3, 0.6, 0.05]
        ];
        let mu = array![0.3, 0.45, 0.25];
        let nu = array![0.2, 0.5, 0.3];
        let eps = 0.1;
        let plan = sinkhorn_log(&c, &mu, &nu, eps, 1e-11, 50_000).unwrap();
        assert!(plan.converged);
        assert!(plan.marginal_violation <= 1e-11);
        assert!(plan.coupling.iter().all(|&p| p > 0.0));

        // dual consistency: reconstruct the coupling from (f, g)
        let mut dev: f64 = 0.0;
        for ((i, j), &p) in plan.coupling.indexed_iter() {
            let rec = mu[i] * nu[j] * ((-c[[i, j]] + plan.f[i] + plan.g[j]) / eps).exp();
            dev = dev.max((rec - p).abs() / p.max(1e-300));
        }
        assert!(dev < 1e-10, "dual reconstruction deviation {dev:e}");

        // primal-dual agreement
        let dual = eot_distance(&plan, &mu, &nu);
        let primal = primal_objective(&c, &plan.coupling, &mu, &nu, eps);
        assert!((dual - primal).abs() <= 1e-8 * dual.abs().max(1.0));
    }

    #[test]
    fn symmetric_instance_gives_symmetric_plan() {
        let y = array![[0.1, 0.2], [0.7, 0.9], [0.4, 0.3], [0.25, 0.75]];
        let cloud = PointCloud::uniform(y).unwrap();
        let c = cost_matrix(&cloud, &cloud, CostModel::SquaredEuclidean).unwrap();
        let mu = cloud.weights().clone();
        let plan = sinkhorn_log(&c, &mu, &mu, 0.05, 1e-11, 100_000).unwrap();
        let mut dev: f64 = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                dev = dev.max((plan.coupling[[i, j]] - plan.coupling[[j, i]]).abs());
            }
        }
        assert!(dev < 1e-10 * plan.coupling.iter().fold(0.0f64, |a, &v| a.max(v)));
    }

    #[test]
    fn violation_trace_is_monotone() {
        let c = array![
            [0.0, 0.9, 0.4],
            [0.8, 0.0, 0.3],
            [0.5, 0.2, 0.0]
        ];
        let mu = array![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0];
        let plan = sinkhorn_log(&c, &mu, &mu, 0.05, 1e-10, 100_000).unwrap();
        for w in plan.violation_trace.windows(2) {
            assert!(
                w[1] <= w[0] + 1e-15,
                "violation increased: {} -> {}",
                w[0],
                w[1]
            );
        }
    }

    #[test]
    fn unconverged_plan_is_flagged() {
        let c = array![[0.0, 1.0], [1.0, 0.0]];
        let mu = array![0.5, 0.5];
        let plan = sinkhorn_log(&c, &mu, &mu, 0.01, 1e-15, 2).unwrap();
        assert!(!plan.converged);
        assert_eq!(plan.iterations, 2);
    }

    #[test]
    fn large_epsilon_tends_to_product_coupling() {
        // entropic limit: Pi -> mu nu^T as eps grows
        let y = array![[0.1, 0.9], [0.8, 0.15], [0.45, 0.5], [0.3, 0.7], [0.9, 0.85]];
        let ys = array![[0.2, 0.1], [0.6, 0.8], [0.95, 0.4], [0.05, 0.55], [0.5, 0.25]];
        let yc = PointCloud::uniform(y).unwrap();
        let ysc = PointCloud::uniform(ys).unwrap();
        let c = cost_matrix(&yc, &ysc, CostModel::SquaredEuclidean).unwrap();
        let mu = yc.weights().clone();
        let nu = ysc.weights().clone();
        let plan = sinkhorn_log(&c, &mu, &nu, 1e4, 1e-12, 1000).unwrap();
        let mut dev: f64 = 0.0;
        for ((i, j), &p) in plan.coupling.indexed_iter() {
            dev = dev.max((p - mu[i] * nu[j]).abs());
        }
        assert!(dev <= 1e-6, "max deviation from product coupling {dev:e}");

        // and the distance approaches the product-coupling cost
        let val = eot_distance(&plan, &mu, &nu);
        let mut lim = 0.0;
        for ((i, j), &cv) in c.indexed_iter() {
            lim += mu[i] * nu[j] * cv;
        }
        assert!((val - lim).abs() <= 1e-4 * lim.abs());
    }

    #[test]
    fn identical_clouds_small_eps_sinkhorn_distance_near_zero() {
        let y = array![
            [0.12, 0.34],
            [0.56, 0.78],
            [0.91, 0.23],
            [0.45, 0.67],
            [0.89, 0.01],
            [0.33, 0.44],
            [0.77, 0.55],
            [0.21, 0.88],
            [0.66, 0.12],
            [0.05, 0.95]
        ];
        let cloud = PointCloud::uniform(y).unwrap();
        let c = cost_matrix(&cloud, &cloud, CostModel::SquaredEuclidean).unwrap();
        let mu = cloud.weights().clone();
        let plan = sinkhorn_log(&c, &mu, &mu, 0.005, 1e-9, 100_000).unwrap();
        let v = sinkhorn_distance(&c, &plan);
        assert!(v >= 0.0);
        assert!(v <= 0.005, "self-transport cost {v} above epsilon level");
    }

    #[test]
    fn rejects_bad_inputs() {
        let c = array![[0.0, 1.0], [1.0, 0.0]];
        let mu = array![0.5, 0.5];
        assert!(sinkhorn_log(&c, &mu, &mu, -1.0, 1e-9, 10).is_err());
        assert!(sinkhorn_log(&c, &mu, &mu, 0.1, 0.0, 10).is_err());
        let bad_mu = array![0.5, -0.5];
        assert!(sinkhorn_log(&c, &bad_mu, &mu, 0.1, 1e-9, 10).is_err());
        let short_mu = array![1.0];
        assert!(matches!(
            sinkhorn_log(&c, &short_mu, &mu, 0.1, 1e-9, 10),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn point_cloud_validation() {
        assert!(PointCloud::new(array![[0.0]], array![0.5]).is_err());
        assert!(PointCloud::new(array![[0.0]], array![1.0]).is_ok());
        assert!(PointCloud::new(array![[f64::NAN]], array![1.0]).is_err());
    }
}
