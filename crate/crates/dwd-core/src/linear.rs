//! Linear generalized DWD fit by majorization-minimization.
//!
//! The penalized objective is
//!
//! ```text
//! C(b0, b) = (1/n) sum_i w_i V_q(y_i (b0 + x_i' b)) + lambda b' b
//! ```
//!
//! Each MM step minimizes the quadratic majorizer obtained from the
//! Lipschitz bound on `V_q'`, which amounts to one solve against the fixed
//! symmetric system
//!
//! ```text
//! P(lambda) = [ sum(w)   1' W X                      ]
//!             [ X' W 1   X' W X + (2 n lambda / M) I ]
//! ```
//!
//! so the factorization is reused across all iterations at a given lambda.
//! With unit weights this is exactly the system of the generalized DWD
//! update; weights enter both the gradient term and the quadratic term.

use nalgebra::{DMatrix, DVector, Dyn};

use crate::data::Dataset;
use crate::error::{DwdError, Result};
use crate::loss::LossSpec;
use crate::solver::{FitReport, SolverConfig};

/// A fitted (or candidate) linear discriminant `x -> beta0 + x' beta`,
/// tagged with the `(q, lambda)` it belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub beta0: f64,
    pub beta: DVector<f64>,
    pub q: f64,
    pub lambda: f64,
}

impl LinearModel {
    /// The all-zero starting point: every margin is 0 and every `V_q'` is -1.
    pub fn zeros(p: usize, q: f64, lambda: f64) -> Self {
        LinearModel {
            beta0: 0.0,
            beta: DVector::zeros(p),
            q,
            lambda,
        }
    }

    /// `beta0 + x' beta` for each row of `xnew`.
    pub fn decision_values(&self, xnew: &DMatrix<f64>) -> Result<DVector<f64>> {
        if xnew.ncols() != self.beta.len() {
            return Err(DwdError::DimensionMismatch(format!(
                "model has {} features, input has {}",
                self.beta.len(),
                xnew.ncols()
            )));
        }
        let mut f = xnew * &self.beta;
        f.add_scalar_mut(self.beta0);
        Ok(f)
    }
}

/// Penalized objective `C(beta0, beta)` on `data`.
pub fn objective(data: &Dataset, model: &LinearModel) -> Result<f64> {
    if model.beta.len() != data.p() {
        return Err(DwdError::DimensionMismatch(format!(
            "model has {} coefficients, data has {} features",
            model.beta.len(),
            data.p()
        )));
    }
    let spec = LossSpec::new(model.q)?;
    let n = data.n() as f64;
    let f = model.decision_values(data.x())?;
    let mut loss = 0.0;
    for i in 0..data.n() {
        let u = data.y()[i] * f[i];
        loss += data.weights()[i] * spec.value(u);
    }
    Ok(loss / n + model.lambda * model.beta.dot(&model.beta))
}

/// Gradient of the penalized objective: `[1'z ; X'z + 2 lambda beta]` with
/// `z_i = w_i y_i V_q'(y_i f_i) / n`. This is also the right-hand side of
/// the MM update, so a zero gradient is exactly a fixed point.
pub fn penalized_gradient(data: &Dataset, model: &LinearModel) -> Result<DVector<f64>> {
    let spec = LossSpec::new(model.q)?;
    let n = data.n() as f64;
    let f = model.decision_values(data.x())?;
    let mut z = DVector::zeros(data.n());
    for i in 0..data.n() {
        let u = data.y()[i] * f[i];
        z[i] = data.weights()[i] * data.y()[i] * spec.derivative(u) / n;
    }
    let mut g = DVector::zeros(data.p() + 1);
    g[0] = z.sum();
    let xtz = data.x().transpose() * &z;
    for j in 0..data.p() {
        g[j + 1] = xtz[j] + 2.0 * model.lambda * model.beta[j];
    }
    Ok(g)
}

/// The factorized MM system for one `(q, lambda)` on one dataset.
pub struct LinearSystem {
    factor: nalgebra::linalg::Cholesky<f64, Dyn>,
    matrix: DMatrix<f64>,
    q: f64,
    lambda: f64,
    lipschitz: f64,
    n: usize,
    p: usize,
    jitter_used: f64,
}

/// Escalation ladder for automatic diagonal jitter, as multiples of the
/// mean diagonal. The system is positive definite for lambda > 0 with unit
/// weights, so these should never be needed; their use is logged.
const LINEAR_JITTER_LADDER: [f64; 5] = [1e-10, 1e-9, 1e-8, 1e-7, 1e-6];

/// Assembles and factorizes `P(lambda)`; the factorization is reused across
/// all MM iterations at this lambda.
pub fn build_system(
    data: &Dataset,
    q: f64,
    lambda: f64,
    config: &SolverConfig,
) -> Result<LinearSystem> {
    let spec = LossSpec::new(q)?;
    check_lambda(lambda)?;
    config.validate()?;
    let n = data.n();
    let p = data.p();
    let m = spec.lipschitz();

    let mut wx = data.x().clone();
    for i in 0..n {
        let w = data.weights()[i];
        wx.row_mut(i).scale_mut(w);
    }
    let sum_w: f64 = data.weights().sum();
    let xtw1 = data.x().transpose() * data.weights();
    let mut block = data.x().transpose() * &wx;
    let ridge = 2.0 * n as f64 * lambda / m;
    for j in 0..p {
        block[(j, j)] += ridge;
    }

    let mut matrix = DMatrix::zeros(p + 1, p + 1);
    matrix[(0, 0)] = sum_w;
    for j in 0..p {
        matrix[(0, j + 1)] = xtw1[j];
        matrix[(j + 1, 0)] = xtw1[j];
    }
    matrix.view_mut((1, 1), (p, p)).copy_from(&block);
    if config.jitter > 0.0 {
        for j in 0..=p {
            matrix[(j, j)] += config.jitter;
        }
    }

    let mean_diag = matrix.diagonal().sum() / (p + 1) as f64;
    let mut jitter_used = 0.0;
    let mut attempt = matrix.clone();
    let factor = loop {
        match nalgebra::linalg::Cholesky::new(attempt.clone()) {
            Some(f) => break f,
            None => {
                let next = LINEAR_JITTER_LADDER
                    .iter()
                    .map(|&s| s * mean_diag)
                    .find(|&j| j > jitter_used)
                    .ok_or_else(|| {
                        DwdError::SingularSystem(format!(
                            "linear system not factorizable at lambda={lambda} \
                             even with jitter up to {:.3e}",
                            jitter_used
                        ))
                    })?;
                log::warn!(
                    "linear system factorization failed, retrying with jitter {:.3e}",
                    next
                );
                attempt = matrix.clone();
                for j in 0..=p {
                    attempt[(j, j)] += next;
                }
                jitter_used = next;
            }
        }
    };
    Ok(LinearSystem {
        factor,
        matrix: attempt,
        q,
        lambda,
        lipschitz: m,
        n,
        p,
        jitter_used,
    })
}

impl LinearSystem {
    /// Solves `P x = rhs` with the cached factorization.
    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.factor.solve(rhs)
    }

    /// The matrix that was actually factorized (jitter included).
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Max absolute row sum; used for the stationarity bound
    /// `|grad|_inf <= (M/n) |P|_inf |step|_inf`.
    pub fn matrix_inf_norm(&self) -> f64 {
        (0..self.matrix.nrows())
            .map(|i| self.matrix.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn jitter_used(&self) -> f64 {
        self.jitter_used
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn q(&self) -> f64 {
        self.q
    }
}

/// One MM update from `current`, using a system built for the same
/// `(q, lambda, weights)`. The objective never increases.
pub fn mm_step(data: &Dataset, current: &LinearModel, system: &LinearSystem) -> Result<LinearModel> {
    if current.q != system.q || current.lambda != system.lambda {
        return Err(DwdError::InvalidParameter(format!(
            "system built for (q={}, lambda={}), model carries (q={}, lambda={})",
            system.q, system.lambda, current.q, current.lambda
        )));
    }
    if current.beta.len() != system.p || data.n() != system.n {
        return Err(DwdError::DimensionMismatch(
            "system, model, and data sizes disagree".into(),
        ));
    }
    let g = penalized_gradient(data, current)?;
    let delta = system.solve(&g);
    let scale = system.n as f64 / system.lipschitz;
    let mut beta = current.beta.clone();
    for j in 0..system.p {
        beta[j] -= scale * delta[j + 1];
    }
    Ok(LinearModel {
        beta0: current.beta0 - scale * delta[0],
        beta,
        q: current.q,
        lambda: current.lambda,
    })
}

/// Fits the linear generalized DWD at one `(q, lambda)`.
///
/// Starts from `warm` when given (coefficients only; the tags are replaced)
/// and from all zeros otherwise. Iterates until the maximum absolute
/// coefficient change drops below `config.tol` or `config.max_iter` is hit;
/// the report says which.
pub fn fit_linear(
    data: &Dataset,
    q: f64,
    lambda: f64,
    config: &SolverConfig,
    warm: Option<&LinearModel>,
) -> Result<(LinearModel, FitReport)> {
    check_fit_ready(data)?;
    let system = build_system(data, q, lambda, config)?;
    let mut model = match warm {
        Some(w) => {
            if w.beta.len() != data.p() {
                return Err(DwdError::DimensionMismatch(format!(
                    "warm start has {} coefficients, data has {} features",
                    w.beta.len(),
                    data.p()
                )));
            }
            LinearModel {
                beta0: w.beta0,
                beta: w.beta.clone(),
                q,
                lambda,
            }
        }
        None => LinearModel::zeros(data.p(), q, lambda),
    };

    let mut trace = Vec::with_capacity(32);
    trace.push(objective(data, &model)?);
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..config.max_iter {
        let next = mm_step(data, &model, &system)?;
        iterations += 1;
        let mut change = (next.beta0 - model.beta0).abs();
        for j in 0..data.p() {
            change = change.max((next.beta[j] - model.beta[j]).abs());
        }
        trace.push(objective(data, &next)?);
        model = next;
        if change < config.tol {
            converged = true;
            break;
        }
    }
    let kkt = penalized_gradient(data, &model)?.amax();
    let scale = system.lipschitz / system.n as f64 * system.matrix_inf_norm();
    let final_objective = *trace.last().expect("trace is never empty");
    Ok((
        model,
        FitReport {
            iterations,
            converged,
            objective_trace: trace,
            final_objective,
            kkt_residual: kkt,
            stationarity_scale: scale,
            jitter_used: system.jitter_used,
        },
    ))
}

/// Fits a whole lambda path. Internally the path is traversed in descending
/// lambda order with warm starts; the output order matches `lambdas`.
pub fn fit_linear_path(
    data: &Dataset,
    q: f64,
    lambdas: &[f64],
    config: &SolverConfig,
) -> Result<Vec<(LinearModel, FitReport)>> {
    if lambdas.is_empty() {
        return Err(DwdError::InvalidParameter("empty lambda path".into()));
    }
    for &l in lambdas {
        check_lambda(l)?;
    }
    let mut order: Vec<usize> = (0..lambdas.len()).collect();
    order.sort_by(|&a, &b| lambdas[b].partial_cmp(&lambdas[a]).unwrap());

    let mut results: Vec<Option<(LinearModel, FitReport)>> = vec![None; lambdas.len()];
    let mut warm: Option<LinearModel> = None;
    for &idx in &order {
        let (model, report) = fit_linear(data, q, lambdas[idx], config, warm.as_ref())?;
        warm = Some(model.clone());
        results[idx] = Some((model, report));
    }
    Ok(results.into_iter().map(|r| r.unwrap()).collect())
}

pub(crate) fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(DwdError::InvalidParameter(format!(
            "lambda must be positive and finite, got {lambda}"
        )));
    }
    Ok(())
}

pub(crate) fn check_fit_ready(data: &Dataset) -> Result<()> {
    if data.n() < 2 {
        return Err(DwdError::InvalidData(format!(
            "fitting needs at least 2 observations, got {}",
            data.n()
        )));
    }
    if !data.has_both_classes() {
        return Err(DwdError::InvalidData(
            "fitting needs both classes present".into(),
        ));
    }
    Ok(())
}
