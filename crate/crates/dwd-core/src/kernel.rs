//! Kernel functions, kernel matrix assembly, and the kernel DWD MM solver.
//!
//! The RKHS problem is
//!
//! ```text
//! C_K(b0, a) = (1/n) sum_i w_i V_q(y_i (b0 + K_i' a)) + lambda a' K a
//! ```
//!
//! solved by the same majorization as the linear case with system matrix
//!
//! ```text
//! P_K(lambda) = [ sum(w)  1' W K                        ]
//!               [ K W 1   K W K + (2 n lambda / M) K    ]
//! ```
//!
//! `P_K` is singular whenever `K` is (duplicated points make that generic),
//! so a small diagonal jitter scaled by `trace(K)/n` is added to the
//! lower-right block by default and escalated if factorization still fails.
//! Any `a` moved along a null direction of `K` changes neither the
//! objective nor the fitted values, so the jitter merely selects one of the
//! equivalent solutions.

use nalgebra::{DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{DwdError, Result};
use crate::linear::{check_fit_ready, check_lambda};
use crate::loss::LossSpec;
use crate::solver::{FitReport, SolverConfig};

/// The kernel function `K(x, x')`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelSpec {
    /// `<x, x'>`
    Linear,
    /// `(offset + <x, x'>)^degree`
    Polynomial { offset: f64, degree: u32 },
    /// `exp(-sigma ||x - x'||^2)`
    Gaussian { sigma: f64 },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Linear => Ok(()),
            KernelSpec::Polynomial { offset, degree } => {
                if !offset.is_finite() {
                    return Err(DwdError::InvalidParameter(
                        "polynomial kernel offset must be finite".into(),
                    ));
                }
                if degree < 1 {
                    return Err(DwdError::InvalidParameter(
                        "polynomial kernel degree must be >= 1".into(),
                    ));
                }
                Ok(())
            }
            KernelSpec::Gaussian { sigma } => {
                if !(sigma.is_finite() && sigma > 0.0) {
                    return Err(DwdError::InvalidParameter(format!(
                        "gaussian kernel sigma must be positive, got {sigma}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// With the Gaussian kind, returns a copy carrying `sigma`; other kinds
    /// are returned unchanged. Used by the sigma grid in cross-validation.
    pub fn with_sigma(&self, sigma: f64) -> KernelSpec {
        match *self {
            KernelSpec::Gaussian { .. } => KernelSpec::Gaussian { sigma },
            other => other,
        }
    }
}

/// `K(a, b)` for two feature vectors of equal length.
pub fn kernel_value(spec: &KernelSpec, a: &[f64], b: &[f64]) -> Result<f64> {
    spec.validate()?;
    if a.len() != b.len() {
        return Err(DwdError::DimensionMismatch(format!(
            "kernel arguments have lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok(match *spec {
        KernelSpec::Linear => dot,
        KernelSpec::Polynomial { offset, degree } => (offset + dot).powi(degree as i32),
        KernelSpec::Gaussian { sigma } => {
            let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
            (-sigma * d2).exp()
        }
    })
}

/// The `m x n` cross-kernel matrix with entries `K(a_i, b_j)` over the rows
/// of `a` and `b`.
pub fn kernel_cross(spec: &KernelSpec, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    spec.validate()?;
    if a.ncols() != b.ncols() {
        return Err(DwdError::DimensionMismatch(format!(
            "feature dimensions differ: {} vs {}",
            a.ncols(),
            b.ncols()
        )));
    }
    let mut gram = a * b.transpose();
    match *spec {
        KernelSpec::Linear => {}
        KernelSpec::Polynomial { offset, degree } => {
            gram.apply(|g| *g = (offset + *g).powi(degree as i32));
        }
        KernelSpec::Gaussian { sigma } => {
            let na: Vec<f64> = (0..a.nrows()).map(|i| a.row(i).norm_squared()).collect();
            let nb: Vec<f64> = (0..b.nrows()).map(|j| b.row(j).norm_squared()).collect();
            for j in 0..b.nrows() {
                for i in 0..a.nrows() {
                    let d2 = (na[i] + nb[j] - 2.0 * gram[(i, j)]).max(0.0);
                    gram[(i, j)] = (-sigma * d2).exp();
                }
            }
        }
    }
    Ok(gram)
}

/// The symmetric `n x n` kernel matrix of the rows of `x`.
///
/// Symmetry is exact by construction (the upper triangle is mirrored) and
/// the Gaussian diagonal is exactly one.
pub fn kernel_matrix(spec: &KernelSpec, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut k = kernel_cross(spec, x, x)?;
    let n = x.nrows();
    if let KernelSpec::Gaussian { .. } = spec {
        for i in 0..n {
            k[(i, i)] = 1.0;
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let v = k[(i, j)];
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

/// A fitted kernel discriminant `x -> beta0 + sum_i alpha_i K(x, x_i)`.
///
/// The model owns a copy of its training inputs so that a serialized model
/// predicts on its own.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelModel {
    pub beta0: f64,
    pub alpha: DVector<f64>,
    pub kernel: KernelSpec,
    pub q: f64,
    pub lambda: f64,
    pub train_inputs: DMatrix<f64>,
}

impl KernelModel {
    /// `beta0 + K_cross alpha` for each row of `xnew`.
    pub fn decision_values(&self, xnew: &DMatrix<f64>) -> Result<DVector<f64>> {
        if self.alpha.len() != self.train_inputs.nrows() {
            return Err(DwdError::DimensionMismatch(
                "alpha length does not match retained training inputs".into(),
            ));
        }
        let cross = kernel_cross(&self.kernel, xnew, &self.train_inputs)?;
        let mut f = cross * &self.alpha;
        f.add_scalar_mut(self.beta0);
        Ok(f)
    }
}

/// In-sample penalized objective `C_K(beta0, alpha)`; recomputes the kernel
/// matrix from the model's retained inputs.
pub fn kernel_objective(data: &Dataset, model: &KernelModel) -> Result<f64> {
    let k = kernel_matrix(&model.kernel, data.x())?;
    objective_with_matrix(data, &k, model)
}

fn objective_with_matrix(data: &Dataset, k: &DMatrix<f64>, model: &KernelModel) -> Result<f64> {
    if model.alpha.len() != data.n() {
        return Err(DwdError::DimensionMismatch(format!(
            "alpha has {} entries, data has {} rows",
            model.alpha.len(),
            data.n()
        )));
    }
    let spec = LossSpec::new(model.q)?;
    let n = data.n() as f64;
    let ka = k * &model.alpha;
    let mut loss = 0.0;
    for i in 0..data.n() {
        let u = data.y()[i] * (model.beta0 + ka[i]);
        loss += data.weights()[i] * spec.value(u);
    }
    Ok(loss / n + model.lambda * model.alpha.dot(&ka))
}

/// Gradient of `C_K` in `(beta0, alpha)`: `[1'z ; K z + 2 lambda K alpha]`
/// with `z_i = w_i y_i V_q'(y_i (beta0 + K_i' alpha)) / n`.
fn kernel_gradient(
    data: &Dataset,
    k: &DMatrix<f64>,
    spec: &LossSpec,
    lambda: f64,
    beta0: f64,
    alpha: &DVector<f64>,
) -> DVector<f64> {
    let n = data.n() as f64;
    let ka = k * alpha;
    let mut z = DVector::zeros(data.n());
    for i in 0..data.n() {
        let u = data.y()[i] * (beta0 + ka[i]);
        z[i] = data.weights()[i] * data.y()[i] * spec.derivative(u) / n;
    }
    let kz = k * &z;
    let mut g = DVector::zeros(data.n() + 1);
    g[0] = z.sum();
    for j in 0..data.n() {
        g[j + 1] = kz[j] + 2.0 * lambda * ka[j];
    }
    g
}

/// Jitter ladder for the kernel system, as multiples of `trace(K)/n`.
/// The first level is applied by default; the rest escalate on failure.
const KERNEL_JITTER_LADDER: [f64; 5] = [1e-8, 1e-7, 1e-6, 1e-5, 1e-4];

struct KernelSystem {
    factor: nalgebra::linalg::Cholesky<f64, Dyn>,
    matrix: DMatrix<f64>,
    jitter_used: f64,
}

fn build_kernel_system(
    data: &Dataset,
    k: &DMatrix<f64>,
    lipschitz: f64,
    lambda: f64,
    config: &SolverConfig,
) -> Result<KernelSystem> {
    let n = data.n();
    let sum_w: f64 = data.weights().sum();
    let kw1 = k * data.weights();
    let mut kw = k.clone();
    for i in 0..n {
        let w = data.weights()[i];
        kw.column_mut(i).scale_mut(w);
    }
    let ridge = 2.0 * n as f64 * lambda / lipschitz;
    let mut block = &kw * k;
    block += k * ridge; // block = KWK + ridge K

    let mut matrix = DMatrix::zeros(n + 1, n + 1);
    matrix[(0, 0)] = sum_w;
    for j in 0..n {
        matrix[(0, j + 1)] = kw1[j];
        matrix[(j + 1, 0)] = kw1[j];
    }
    matrix.view_mut((1, 1), (n, n)).copy_from(&block);
    if config.jitter > 0.0 {
        for j in 0..=n {
            matrix[(j, j)] += config.jitter;
        }
    }

    let trace_scale = k.trace() / n as f64;
    for (level_idx, &level) in KERNEL_JITTER_LADDER.iter().enumerate() {
        let jitter = level * trace_scale;
        let mut attempt = matrix.clone();
        for j in 0..n {
            attempt[(j + 1, j + 1)] += jitter;
        }
        if let Some(factor) = nalgebra::linalg::Cholesky::new(attempt.clone()) {
            if level_idx > 0 {
                log::info!("kernel system factorized with escalated jitter {jitter:.3e}");
            }
            return Ok(KernelSystem {
                factor,
                matrix: attempt,
                jitter_used: jitter,
            });
        }
    }
    Err(DwdError::SingularSystem(format!(
        "kernel system not factorizable at lambda={lambda} even at maximum jitter"
    )))
}

impl KernelSystem {
    fn matrix_inf_norm(&self) -> f64 {
        (0..self.matrix.nrows())
            .map(|i| self.matrix.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Fits the kernel generalized DWD at one `(q, lambda)`.
pub fn fit_kernel(
    data: &Dataset,
    kernel: &KernelSpec,
    q: f64,
    lambda: f64,
    config: &SolverConfig,
    warm: Option<&KernelModel>,
) -> Result<(KernelModel, FitReport)> {
    let k = kernel_matrix(kernel, data.x())?;
    fit_kernel_with_matrix(data, &k, kernel, q, lambda, config, warm)
}

/// Fits a whole lambda path with the kernel matrix assembled once.
/// Traversal is in descending lambda order with warm starts; output order
/// matches `lambdas`.
pub fn fit_kernel_path(
    data: &Dataset,
    kernel: &KernelSpec,
    q: f64,
    lambdas: &[f64],
    config: &SolverConfig,
) -> Result<Vec<(KernelModel, FitReport)>> {
    if lambdas.is_empty() {
        return Err(DwdError::InvalidParameter("empty lambda path".into()));
    }
    for &l in lambdas {
        check_lambda(l)?;
    }
    let k = kernel_matrix(kernel, data.x())?;
    let mut order: Vec<usize> = (0..lambdas.len()).collect();
    order.sort_by(|&a, &b| lambdas[b].partial_cmp(&lambdas[a]).unwrap());

    let mut results: Vec<Option<(KernelModel, FitReport)>> = vec![None; lambdas.len()];
    let mut warm: Option<KernelModel> = None;
    for &idx in &order {
        let (model, report) =
            fit_kernel_with_matrix(data, &k, kernel, q, lambdas[idx], config, warm.as_ref())?;
        warm = Some(model.clone());
        results[idx] = Some((model, report));
    }
    Ok(results.into_iter().map(|r| r.unwrap()).collect())
}

fn fit_kernel_with_matrix(
    data: &Dataset,
    k: &DMatrix<f64>,
    kernel: &KernelSpec,
    q: f64,
    lambda: f64,
    config: &SolverConfig,
    warm: Option<&KernelModel>,
) -> Result<(KernelModel, FitReport)> {
    let spec = LossSpec::new(q)?;
    check_lambda(lambda)?;
    config.validate()?;
    check_fit_ready(data)?;
    kernel.validate()?;
    let n = data.n();

    let system = build_kernel_system(data, k, spec.lipschitz(), lambda, config)?;
    let (mut beta0, mut alpha) = match warm {
        Some(w) => {
            if w.alpha.len() != n {
                return Err(DwdError::DimensionMismatch(format!(
                    "warm start has {} dual coefficients, data has {} rows",
                    w.alpha.len(),
                    n
                )));
            }
            (w.beta0, w.alpha.clone())
        }
        None => (0.0, DVector::zeros(n)),
    };

    let probe = |b0: f64, a: &DVector<f64>| -> Result<f64> {
        objective_with_matrix(
            data,
            k,
            &KernelModel {
                beta0: b0,
                alpha: a.clone(),
                kernel: *kernel,
                q,
                lambda,
                train_inputs: data.x().clone(),
            },
        )
    };

    let mut trace = Vec::with_capacity(32);
    trace.push(probe(beta0, &alpha)?);
    let mut converged = false;
    let mut iterations = 0;
    let scale = n as f64 / spec.lipschitz();
    for _ in 0..config.max_iter {
        let g = kernel_gradient(data, k, &spec, lambda, beta0, &alpha);
        let delta = system.factor.solve(&g);
        let new_beta0 = beta0 - scale * delta[0];
        let mut change = (new_beta0 - beta0).abs();
        beta0 = new_beta0;
        for j in 0..n {
            let step = scale * delta[j + 1];
            change = change.max(step.abs());
            alpha[j] -= step;
        }
        iterations += 1;
        trace.push(probe(beta0, &alpha)?);
        if change < config.tol {
            converged = true;
            break;
        }
    }
    let kkt = kernel_gradient(data, k, &spec, lambda, beta0, &alpha).amax();
    let final_objective = *trace.last().expect("trace is never empty");
    let model = KernelModel {
        beta0,
        alpha,
        kernel: *kernel,
        q,
        lambda,
        train_inputs: data.x().clone(),
    };
    Ok((
        model,
        FitReport {
            iterations,
            converged,
            objective_trace: trace,
            final_objective,
            kkt_residual: kkt,
            stationarity_scale: spec.lipschitz() / n as f64 * system.matrix_inf_norm(),
            jitter_used: system.jitter_used,
        },
    ))
}

const MEDIAN_HEURISTIC_SEED: u64 = 0x6477645f7369676d; // fixed: determinism without a seed argument
const MEDIAN_HEURISTIC_MAX_PAIRS: usize = 10_000;

/// Default Gaussian bandwidth: `1 / median(||x_i - x_j||^2)` over all pairs,
/// subsampled to at most 10^4 pairs for large `n` (deterministically).
pub fn median_heuristic_sigma(x: &DMatrix<f64>) -> Result<f64> {
    use rand::{Rng, SeedableRng};
    let n = x.nrows();
    if n < 2 {
        return Err(DwdError::InvalidData(
            "median heuristic needs at least 2 points".into(),
        ));
    }
    let total_pairs = n * (n - 1) / 2;
    let mut d2s: Vec<f64> = Vec::new();
    if total_pairs <= MEDIAN_HEURISTIC_MAX_PAIRS {
        for i in 0..n {
            for j in (i + 1)..n {
                d2s.push((x.row(i) - x.row(j)).norm_squared());
            }
        }
    } else {
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(MEDIAN_HEURISTIC_SEED);
        while d2s.len() < MEDIAN_HEURISTIC_MAX_PAIRS {
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            if i == j {
                continue;
            }
            d2s.push((x.row(i) - x.row(j)).norm_squared());
        }
    }
    d2s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = d2s.len() / 2;
    let median = if d2s.len() % 2 == 1 {
        d2s[mid]
    } else {
        0.5 * (d2s[mid - 1] + d2s[mid])
    };
    if median <= 0.0 {
        return Err(DwdError::InvalidData(
            "median pairwise distance is zero (identical points)".into(),
        ));
    }
    Ok(1.0 / median)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn random_instance(n: usize, p: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut x = DMatrix::zeros(n, p);
        let mut y = DVector::zeros(n);
        for i in 0..n {
            let label = if i % 2 == 0 { 1.0 } else { -1.0 };
            y[i] = label;
            for j in 0..p {
                let shift = if j == 0 { label } else { 0.0 };
                x[(i, j)] = shift + 2.0 * rng.random::<f64>() - 1.0;
            }
        }
        Dataset::new(x, y).unwrap()
    }

    #[test]
    fn kernel_value_examples() {
        assert_eq!(
            kernel_value(&KernelSpec::Gaussian { sigma: 0.7 }, &[1.0, 2.0], &[1.0, 2.0]).unwrap(),
            1.0
        );
        assert_eq!(
            kernel_value(&KernelSpec::Linear, &[1.0, 2.0], &[3.0, 4.0]).unwrap(),
            11.0
        );
        assert_eq!(
            kernel_value(
                &KernelSpec::Polynomial {
                    offset: 1.0,
                    degree: 2
                },
                &[1.0, 0.0],
                &[1.0, 0.0]
            )
            .unwrap(),
            4.0
        );
    }

    #[test]
    fn kernel_value_rejects_dimension_mismatch() {
        assert!(kernel_value(&KernelSpec::Linear, &[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn kernel_spec_validation() {
        assert!(KernelSpec::Gaussian { sigma: 0.0 }.validate().is_err());
        assert!(KernelSpec::Gaussian { sigma: -1.0 }.validate().is_err());
        assert!(KernelSpec::Polynomial {
            offset: 1.0,
            degree: 0
        }
        .validate()
        .is_err());
        assert!(KernelSpec::Linear.validate().is_ok());
    }

    #[test]
    fn one_point_matrix() {
        let x = DMatrix::from_row_slice(1, 2, &[3.0, 4.0]);
        let k = kernel_matrix(&KernelSpec::Linear, &x).unwrap();
        assert_eq!(k.nrows(), 1);
        assert_eq!(k[(0, 0)], 25.0);
    }

    #[test]
    fn matrix_is_exactly_symmetric_with_unit_gaussian_diagonal() {
        let data = random_instance(17, 4, 21);
        let k = kernel_matrix(&KernelSpec::Gaussian { sigma: 0.3 }, data.x()).unwrap();
        assert_eq!((&k - k.transpose()).amax(), 0.0);
        for i in 0..17 {
            assert_eq!(k[(i, i)], 1.0);
        }
    }

    #[test]
    fn matrix_is_positive_semidefinite_up_to_roundoff() {
        for (spec, seed) in [
            (KernelSpec::Gaussian { sigma: 0.5 }, 30u64),
            (KernelSpec::Linear, 31),
            (
                KernelSpec::Polynomial {
                    offset: 1.0,
                    degree: 3,
                },
                32,
            ),
        ] {
            let data = random_instance(20, 3, seed);
            let k = kernel_matrix(&spec, data.x()).unwrap();
            let trace = k.trace();
            let eigs = nalgebra::linalg::SymmetricEigen::new(k).eigenvalues;
            let min = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(min >= -1e-8 * trace / 20.0, "spec={spec:?} min={min}");
        }
    }

    #[test]
    fn cross_matrix_matches_pointwise_values() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 2.0, -1.0]);
        let b = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 0.5, 0.0, -2.0, 3.0]);
        for spec in [
            KernelSpec::Linear,
            KernelSpec::Gaussian { sigma: 0.8 },
            KernelSpec::Polynomial {
                offset: 0.5,
                degree: 2,
            },
        ] {
            let cross = kernel_cross(&spec, &a, &b).unwrap();
            for i in 0..2 {
                for j in 0..3 {
                    let ai: Vec<f64> = a.row(i).iter().cloned().collect();
                    let bj: Vec<f64> = b.row(j).iter().cloned().collect();
                    assert_relative_eq!(
                        cross[(i, j)],
                        kernel_value(&spec, &ai, &bj).unwrap(),
                        epsilon = 1e-12
                    );
                }
            }
        }
    }

    #[test]
    fn decision_values_on_training_inputs() {
        let data = random_instance(10, 2, 33);
        let spec = KernelSpec::Gaussian { sigma: 0.5 };
        let (model, _) = fit_kernel(&data, &spec, 1.0, 0.3, &SolverConfig::default(), None).unwrap();
        let k = kernel_matrix(&spec, data.x()).unwrap();
        let expected = {
            let mut f = &k * &model.alpha;
            f.add_scalar_mut(model.beta0);
            f
        };
        let got = model.decision_values(data.x()).unwrap();
        assert!((got - expected).amax() < 1e-12);
    }

    #[test]
    fn zero_alpha_gives_constant_decision_values() {
        let data = random_instance(6, 2, 34);
        let model = KernelModel {
            beta0: 0.37,
            alpha: DVector::zeros(6),
            kernel: KernelSpec::Linear,
            q: 1.0,
            lambda: 0.1,
            train_inputs: data.x().clone(),
        };
        let f = model.decision_values(data.x()).unwrap();
        assert!(f.iter().all(|&v| v == 0.37));
    }

    #[test]
    fn single_point_prediction_matches_naive_sum() {
        let data = random_instance(12, 3, 35);
        let spec = KernelSpec::Gaussian { sigma: 0.4 };
        let (model, _) = fit_kernel(&data, &spec, 1.0, 0.2, &SolverConfig::default(), None).unwrap();
        let xnew = DMatrix::from_row_slice(1, 3, &[0.3, -0.7, 0.1]);
        let fast = model.decision_values(&xnew).unwrap()[0];
        let point: Vec<f64> = xnew.row(0).iter().cloned().collect();
        let mut slow = model.beta0;
        for i in 0..12 {
            let xi: Vec<f64> = data.x().row(i).iter().cloned().collect();
            slow += model.alpha[i] * kernel_value(&spec, &point, &xi).unwrap();
        }
        assert_relative_eq!(fast, slow, epsilon = 1e-12);
    }

    #[test]
    fn mm_fixed_point_at_minimizer() {
        let data = random_instance(14, 2, 36);
        let spec = KernelSpec::Gaussian { sigma: 0.6 };
        let config = SolverConfig {
            tol: 1e-12,
            max_iter: 100_000,
            jitter: 0.0,
        };
        let (model, report) = fit_kernel(&data, &spec, 1.0, 0.5, &config, None).unwrap();
        assert!(report.converged);
        // One more fit from the converged point must not move.
        let (again, r2) = fit_kernel(&data, &spec, 1.0, 0.5, &config, Some(&model)).unwrap();
        assert!(r2.iterations <= 2);
        assert!((again.beta0 - model.beta0).abs() < 1e-10);
        assert!((again.alpha - model.alpha).amax() < 1e-10);
    }

    #[test]
    fn objective_trace_is_nonincreasing() {
        for seed in 0..4 {
            let data = random_instance(18, 3, 40 + seed);
            let (_, report) = fit_kernel(
                &data,
                &KernelSpec::Gaussian { sigma: 0.7 },
                4.0,
                0.05,
                &SolverConfig::default(),
                None,
            )
            .unwrap();
            for w in report.objective_trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-12);
            }
        }
    }

    #[test]
    fn stationarity_bound_at_convergence() {
        let data = random_instance(16, 2, 44);
        let config = SolverConfig::default();
        let (_, report) = fit_kernel(
            &data,
            &KernelSpec::Gaussian { sigma: 0.5 },
            1.0,
            0.2,
            &config,
            None,
        )
        .unwrap();
        assert!(report.converged);
        assert!(report.kkt_residual <= 10.0 * config.tol * report.stationarity_scale);
    }

    #[test]
    fn null_direction_changes_nothing() {
        // Duplicate a point so K is exactly rank-deficient; moving alpha
        // along e_i - e_j (duplicated pair) leaves objective and fit alone.
        let base = random_instance(10, 2, 45);
        let data = {
            let mut x = base.x().clone();
            let row: Vec<f64> = x.row(3).iter().cloned().collect();
            x.row_mut(7).copy_from_slice(&row);
            let mut y = base.y().clone();
            y[7] = y[3];
            Dataset::new(x, y).unwrap()
        };
        let spec = KernelSpec::Gaussian { sigma: 0.4 };
        let (model, _) = fit_kernel(&data, &spec, 1.0, 0.3, &SolverConfig::default(), None).unwrap();

        let mut shifted = model.clone();
        shifted.alpha[3] += 0.9;
        shifted.alpha[7] -= 0.9;
        let a = kernel_objective(&data, &model).unwrap();
        let b = kernel_objective(&data, &shifted).unwrap();
        assert_relative_eq!(a, b, epsilon = 1e-10);
        let fa = model.decision_values(data.x()).unwrap();
        let fb = shifted.decision_values(data.x()).unwrap();
        assert!((fa - fb).amax() < 1e-10);
    }

    #[test]
    fn gaussian_predictions_are_translation_invariant() {
        let data = random_instance(15, 3, 46);
        let shift = [13.25, -4.5, 7.75];
        let shifted_x = {
            let mut x = data.x().clone();
            for i in 0..x.nrows() {
                for j in 0..3 {
                    x[(i, j)] += shift[j];
                }
            }
            x
        };
        let shifted = Dataset::new(shifted_x.clone(), data.y().clone()).unwrap();
        let spec = KernelSpec::Gaussian { sigma: 0.5 };
        let config = SolverConfig {
            tol: 1e-10,
            ..Default::default()
        };
        let (m1, _) = fit_kernel(&data, &spec, 1.0, 0.2, &config, None).unwrap();
        let (m2, _) = fit_kernel(&shifted, &spec, 1.0, 0.2, &config, None).unwrap();
        let f1 = m1.decision_values(data.x()).unwrap();
        let f2 = m2.decision_values(&shifted_x).unwrap();
        assert!((f1 - f2).amax() < 1e-8);
    }

    #[test]
    fn median_heuristic_two_points() {
        let x = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]);
        assert_relative_eq!(median_heuristic_sigma(&x).unwrap(), 1.0);
    }

    #[test]
    fn median_heuristic_duplication_invariance() {
        let x = DMatrix::from_row_slice(3, 1, &[0.0, 1.0, 3.0]);
        let doubled = DMatrix::from_row_slice(6, 1, &[0.0, 1.0, 3.0, 0.0, 1.0, 3.0]);
        // Duplicating every point keeps the median pairwise distance.
        let a = median_heuristic_sigma(&x).unwrap();
        let b = median_heuristic_sigma(&doubled).unwrap();
        assert_relative_eq!(a, b);
    }

    #[test]
    fn median_heuristic_scales_inverse_quadratically() {
        let data = random_instance(25, 3, 47);
        let a = median_heuristic_sigma(data.x()).unwrap();
        let scaled = data.x() * 3.0;
        let b = median_heuristic_sigma(&scaled).unwrap();
        assert_relative_eq!(b, a / 9.0, max_relative = 1e-10);
    }

    #[test]
    fn median_heuristic_rejects_identical_points() {
        let x = DMatrix::from_row_slice(3, 1, &[2.0, 2.0, 2.0]);
        assert!(median_heuristic_sigma(&x).is_err());
    }

    #[test]
    fn kernel_spec_json_round_trip() {
        for spec in [
            KernelSpec::Linear,
            KernelSpec::Polynomial {
                offset: 1.5,
                degree: 3,
            },
            KernelSpec::Gaussian { sigma: 0.125 },
        ] {
            let text = serde_json::to_string(&spec).unwrap();
            let back: KernelSpec = serde_json::from_str(&text).unwrap();
            assert_eq!(spec, back);
        }
    }
}
