//! k-fold cross-validation over lambda (and sigma for Gaussian kernels).
//!
//! The protocol: split the training data into `k` folds (stratified by
//! class unless disabled), fit a warm-started lambda path on each set of
//! `k-1` folds, score 0-1 error on the held-out fold, average over folds,
//! pick the grid point with the smallest mean error (ties broken toward
//! larger lambda, then larger sigma), and refit on the full data.

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{DwdError, Result};
use crate::kernel::{fit_kernel, fit_kernel_path, median_heuristic_sigma, KernelSpec};
use crate::linear::{fit_linear, fit_linear_path};
use crate::model::{label_of, Model};
use crate::solver::{FitReport, SolverConfig};

/// Grid and fold layout for one cross-validation run.
#[derive(Debug, Clone)]
pub struct CvPlan {
    pub folds: usize,
    pub lambda_grid: Vec<f64>,
    /// Sigma grid for Gaussian kernels. `None` means: derive one from the
    /// median heuristic (times 2^-3..2^3) when the kernel is Gaussian.
    pub sigma_grid: Option<Vec<f64>>,
    pub seed: u64,
    /// Per-class balanced fold assignment (default). Plain random otherwise.
    pub stratified: bool,
}

impl CvPlan {
    pub fn new(seed: u64) -> Self {
        CvPlan {
            folds: 5,
            lambda_grid: default_lambda_grid(),
            sigma_grid: None,
            seed,
            stratified: true,
        }
    }
}

/// 50 log-spaced lambda values in [1e-4, 1e2].
pub fn default_lambda_grid() -> Vec<f64> {
    log_space(1e-4, 1e2, 50)
}

/// Median-heuristic sigma times 2^-3 .. 2^3.
pub fn default_sigma_grid(x: &nalgebra::DMatrix<f64>) -> Result<Vec<f64>> {
    let center = median_heuristic_sigma(x)?;
    Ok((-3..=3).map(|e| center * 2f64.powi(e)).collect())
}

/// `count` geometrically spaced values from `lo` to `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > 0.0 && count > 0);
    if count == 1 {
        return vec![lo];
    }
    let ratio = (hi / lo).ln();
    (0..count)
        .map(|i| (lo.ln() + ratio * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Random fold assignment: a vector of fold ids, one per observation.
/// Deterministic given the seed; fold sizes differ by at most one.
pub fn kfold_split(n: usize, folds: usize, seed: u64) -> Result<Vec<usize>> {
    check_folds(n, folds)?;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut assignment = vec![0usize; n];
    for (pos, &idx) in order.iter().enumerate() {
        assignment[idx] = pos % folds;
    }
    Ok(assignment)
}

/// Fold assignment that spreads each class evenly across folds.
pub fn stratified_kfold(y: &DVector<f64>, folds: usize, seed: u64) -> Result<Vec<usize>> {
    let n = y.len();
    check_folds(n, folds)?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut neg: Vec<usize> = (0..n).filter(|&i| y[i] < 0.0).collect();
    let mut pos: Vec<usize> = (0..n).filter(|&i| y[i] > 0.0).collect();
    neg.shuffle(&mut rng);
    pos.shuffle(&mut rng);
    let mut assignment = vec![0usize; n];
    for (pos_in_order, &idx) in neg.iter().chain(pos.iter()).enumerate() {
        assignment[idx] = pos_in_order % folds;
    }
    Ok(assignment)
}

fn check_folds(n: usize, folds: usize) -> Result<()> {
    if folds < 2 || folds > n {
        return Err(DwdError::CrossValidation(format!(
            "folds must lie in [2, n={n}], got {folds}"
        )));
    }
    Ok(())
}

/// One grid point's cross-validated score.
#[derive(Debug, Clone)]
pub struct CvCell {
    pub sigma: Option<f64>,
    pub lambda: f64,
    pub fold_errors: Vec<f64>,
    pub mean_error: f64,
    /// Standard error of the fold mean: sd(fold errors) / sqrt(k).
    pub std_error: f64,
}

/// The full grid table, the chosen pair, and the refit model.
#[derive(Debug, Clone)]
pub struct CvResult {
    pub cells: Vec<CvCell>,
    pub chosen_sigma: Option<f64>,
    pub chosen_lambda: f64,
    pub model: Model,
    pub refit_report: FitReport,
    /// Number of fold/refit fits that hit the iteration cap. Such fits are
    /// scored with their returned model, not discarded.
    pub nonconverged_fits: usize,
}

/// Runs the cross-validation protocol on `data` at fixed `q`.
///
/// `kernel = None` tunes the linear (primal) classifier over lambda;
/// a Gaussian kernel tunes the `(sigma, lambda)` pair. Fold-by-grid fits
/// run as independent tasks; the reduction is by grid index, so results do
/// not depend on scheduling.
pub fn cross_validate(
    data: &Dataset,
    q: f64,
    kernel: Option<&KernelSpec>,
    plan: &CvPlan,
    config: &SolverConfig,
) -> Result<CvResult> {
    if plan.lambda_grid.is_empty() {
        return Err(DwdError::CrossValidation("empty lambda grid".into()));
    }
    for &l in &plan.lambda_grid {
        if !(l.is_finite() && l > 0.0) {
            return Err(DwdError::CrossValidation(format!(
                "lambda grid must be strictly positive, got {l}"
            )));
        }
    }
    if let Some(grid) = &plan.sigma_grid {
        if grid.is_empty() || grid.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
            return Err(DwdError::CrossValidation(
                "sigma grid must be nonempty and strictly positive".into(),
            ));
        }
        if !matches!(kernel, Some(KernelSpec::Gaussian { .. })) {
            return Err(DwdError::CrossValidation(
                "a sigma grid requires a gaussian kernel".into(),
            ));
        }
    }
    config.validate()?;

    let sigma_axis: Vec<Option<f64>> = match kernel {
        Some(KernelSpec::Gaussian { .. }) => match &plan.sigma_grid {
            Some(grid) => grid.iter().cloned().map(Some).collect(),
            None => default_sigma_grid(data.x())?.into_iter().map(Some).collect(),
        },
        _ => vec![None],
    };

    let assignment = draw_assignment(data, plan)?;
    let folds = plan.folds;
    let fold_indices: Vec<(Vec<usize>, Vec<usize>)> = (0..folds)
        .map(|f| {
            let train: Vec<usize> = (0..data.n()).filter(|&i| assignment[i] != f).collect();
            let test: Vec<usize> = (0..data.n()).filter(|&i| assignment[i] == f).collect();
            (train, test)
        })
        .collect();

    let tasks: Vec<(usize, usize)> = (0..sigma_axis.len())
        .flat_map(|si| (0..folds).map(move |f| (si, f)))
        .collect();

    // Per task: 0-1 error on the held-out fold for every lambda, in
    // plan.lambda_grid order, plus the count of non-converged fits.
    let task_results: Result<Vec<(Vec<f64>, usize)>> = tasks
        .par_iter()
        .map(|&(si, f)| -> Result<(Vec<f64>, usize)> {
            let (train_idx, test_idx) = &fold_indices[f];
            let train = data.subset(train_idx)?;
            let test = data.subset(test_idx)?;
            let mut nonconverged = 0usize;
            let mut errors = Vec::with_capacity(plan.lambda_grid.len());
            match (kernel, sigma_axis[si]) {
                (Some(spec), sigma) => {
                    let spec = match sigma {
                        Some(s) => spec.with_sigma(s),
                        None => *spec,
                    };
                    let fits = fit_kernel_path(&train, &spec, q, &plan.lambda_grid, config)?;
                    for (model, report) in &fits {
                        if !report.converged {
                            nonconverged += 1;
                        }
                        errors.push(zero_one_error(
                            &Model::Kernel(model.clone()),
                            &test,
                        )?);
                    }
                }
                (None, _) => {
                    let fits = fit_linear_path(&train, q, &plan.lambda_grid, config)?;
                    for (model, report) in &fits {
                        if !report.converged {
                            nonconverged += 1;
                        }
                        errors.push(zero_one_error(&Model::Linear(model.clone()), &test)?);
                    }
                }
            }
            Ok((errors, nonconverged))
        })
        .collect();
    let task_results = task_results?;

    let mut nonconverged_fits: usize = task_results.iter().map(|(_, c)| c).sum();
    let mut cells = Vec::with_capacity(sigma_axis.len() * plan.lambda_grid.len());
    for (si, &sigma) in sigma_axis.iter().enumerate() {
        for (li, &lambda) in plan.lambda_grid.iter().enumerate() {
            let fold_errors: Vec<f64> = (0..folds)
                .map(|f| task_results[si * folds + f].0[li])
                .collect();
            let mean = fold_errors.iter().sum::<f64>() / folds as f64;
            let var = fold_errors
                .iter()
                .map(|e| (e - mean) * (e - mean))
                .sum::<f64>()
                / (folds - 1) as f64;
            cells.push(CvCell {
                sigma,
                lambda,
                fold_errors,
                mean_error: mean,
                std_error: (var / folds as f64).sqrt(),
            });
        }
    }

    let best = cells
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| {
            a.mean_error
                .partial_cmp(&b.mean_error)
                .unwrap()
                .then(b.lambda.partial_cmp(&a.lambda).unwrap())
                .then(
                    b.sigma
                        .unwrap_or(0.0)
                        .partial_cmp(&a.sigma.unwrap_or(0.0))
                        .unwrap(),
                )
        })
        .map(|(i, _)| i)
        .expect("grid is nonempty");
    let chosen_sigma = cells[best].sigma;
    let chosen_lambda = cells[best].lambda;

    let (model, refit_report) = match kernel {
        Some(spec) => {
            let spec = match chosen_sigma {
                Some(s) => spec.with_sigma(s),
                None => *spec,
            };
            let (m, r) = fit_kernel(data, &spec, q, chosen_lambda, config, None)?;
            (Model::Kernel(m), r)
        }
        None => {
            let (m, r) = fit_linear(data, q, chosen_lambda, config, None)?;
            (Model::Linear(m), r)
        }
    };
    if !refit_report.converged {
        nonconverged_fits += 1;
    }

    Ok(CvResult {
        cells,
        chosen_sigma,
        chosen_lambda,
        model,
        refit_report,
        nonconverged_fits,
    })
}

/// Fraction of misclassified rows of `test`.
pub fn zero_one_error(model: &Model, test: &Dataset) -> Result<f64> {
    let d = model.decision_values(test.x())?;
    let wrong = (0..test.n())
        .filter(|&i| label_of(d[i]) != test.y()[i])
        .count();
    Ok(wrong as f64 / test.n() as f64)
}

/// Draws the fold assignment, redrawing with bumped seeds until every
/// training fold contains both classes (up to 100 attempts).
fn draw_assignment(data: &Dataset, plan: &CvPlan) -> Result<Vec<usize>> {
    for attempt in 0..100 {
        let seed = plan.seed.wrapping_add(attempt);
        let assignment = if plan.stratified {
            stratified_kfold(data.y(), plan.folds, seed)?
        } else {
            kfold_split(data.n(), plan.folds, seed)?
        };
        let ok = (0..plan.folds).all(|f| {
            let mut has_pos = false;
            let mut has_neg = false;
            for i in 0..data.n() {
                if assignment[i] != f {
                    if data.y()[i] > 0.0 {
                        has_pos = true;
                    } else {
                        has_neg = true;
                    }
                }
            }
            has_pos && has_neg
        });
        if ok {
            return Ok(assignment);
        }
    }
    Err(DwdError::CrossValidation(
        "could not draw folds with both classes in every training set after 100 attempts".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};

    fn blobs(n: usize, gap: f64, seed: u64) -> Dataset {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut x = DMatrix::zeros(n, 2);
        let mut y = DVector::zeros(n);
        for i in 0..n {
            let label = if i % 2 == 0 { 1.0 } else { -1.0 };
            y[i] = label;
            x[(i, 0)] = label * gap + rng.random::<f64>() - 0.5;
            x[(i, 1)] = rng.random::<f64>() - 0.5;
        }
        Dataset::new(x, y).unwrap()
    }

    fn fold_sizes(assignment: &[usize], folds: usize) -> Vec<usize> {
        let mut sizes = vec![0usize; folds];
        for &f in assignment {
            sizes[f] += 1;
        }
        sizes
    }

    #[test]
    fn kfold_even_division() {
        let a = kfold_split(10, 5, 1).unwrap();
        assert_eq!(fold_sizes(&a, 5), vec![2, 2, 2, 2, 2]);
    }

    #[test]
    fn kfold_balanced_remainder() {
        let a = kfold_split(7, 5, 1).unwrap();
        let mut sizes = fold_sizes(&a, 5);
        sizes.sort_unstable();
        assert_eq!(sizes, vec![1, 1, 1, 2, 2]);
    }

    #[test]
    fn kfold_is_deterministic() {
        assert_eq!(kfold_split(23, 4, 9).unwrap(), kfold_split(23, 4, 9).unwrap());
        assert_ne!(kfold_split(23, 4, 9).unwrap(), kfold_split(23, 4, 10).unwrap());
    }

    #[test]
    fn kfold_rejects_bad_fold_counts() {
        assert!(kfold_split(5, 1, 0).is_err());
        assert!(kfold_split(5, 6, 0).is_err());
    }

    #[test]
    fn stratified_folds_balance_each_class() {
        let data = blobs(30, 1.0, 3);
        let a = stratified_kfold(data.y(), 5, 7).unwrap();
        for f in 0..5 {
            let pos = (0..30)
                .filter(|&i| a[i] == f && data.y()[i] > 0.0)
                .count();
            let neg = (0..30)
                .filter(|&i| a[i] == f && data.y()[i] < 0.0)
                .count();
            assert_eq!(pos, 3, "fold {f}");
            assert_eq!(neg, 3, "fold {f}");
        }
    }

    #[test]
    fn single_point_grid_equals_single_fit() {
        let data = blobs(20, 1.5, 11);
        let plan = CvPlan {
            folds: 5,
            lambda_grid: vec![0.3],
            sigma_grid: None,
            seed: 4,
            stratified: true,
        };
        let config = SolverConfig::default();
        let cv = cross_validate(&data, 1.0, None, &plan, &config).unwrap();
        assert_eq!(cv.cells.len(), 1);
        assert_eq!(cv.chosen_lambda, 0.3);
        let (direct, _) = fit_linear(&data, 1.0, 0.3, &config, None).unwrap();
        match &cv.model {
            Model::Linear(m) => {
                assert_eq!(m.beta0, direct.beta0);
                assert_eq!(m.beta, direct.beta);
            }
            _ => panic!("expected linear model"),
        }
    }

    #[test]
    fn separable_data_reaches_zero_cv_error() {
        let data = blobs(40, 4.0, 12);
        let plan = CvPlan {
            folds: 5,
            lambda_grid: log_space(1e-3, 1.0, 8),
            sigma_grid: None,
            seed: 5,
            stratified: true,
        };
        let cv = cross_validate(&data, 1.0, None, &plan, &SolverConfig::default()).unwrap();
        assert!(cv.cells.iter().any(|c| c.mean_error == 0.0));
        assert_eq!(
            cv.cells
                .iter()
                .find(|c| c.lambda == cv.chosen_lambda)
                .unwrap()
                .mean_error,
            0.0
        );
    }

    #[test]
    fn cell_errors_match_manual_fold_recompute() {
        let data = blobs(24, 0.6, 13);
        let plan = CvPlan {
            folds: 4,
            lambda_grid: vec![0.05, 0.5],
            sigma_grid: None,
            seed: 21,
            stratified: true,
        };
        let config = SolverConfig::default();
        let cv = cross_validate(&data, 1.0, None, &plan, &config).unwrap();

        // Recompute outside the tuner: same assignment (first draw works
        // for stratified balanced data), same warm-started paths.
        let assignment = stratified_kfold(data.y(), 4, 21).unwrap();
        for (li, &lambda) in plan.lambda_grid.iter().enumerate() {
            let mut manual = Vec::new();
            for f in 0..4 {
                let train_idx: Vec<usize> =
                    (0..24).filter(|&i| assignment[i] != f).collect();
                let test_idx: Vec<usize> = (0..24).filter(|&i| assignment[i] == f).collect();
                let train = data.subset(&train_idx).unwrap();
                let test = data.subset(&test_idx).unwrap();
                let fits = fit_linear_path(&train, 1.0, &plan.lambda_grid, &config).unwrap();
                manual.push(
                    zero_one_error(&Model::Linear(fits[li].0.clone()), &test).unwrap(),
                );
            }
            let cell = &cv.cells[li];
            assert_eq!(cell.fold_errors, manual, "lambda={lambda}");
            let mean = manual.iter().sum::<f64>() / 4.0;
            assert_eq!(cell.mean_error, mean);
        }
    }

    #[test]
    fn cv_is_deterministic() {
        let data = blobs(26, 0.8, 14);
        let plan = CvPlan {
            folds: 5,
            lambda_grid: vec![0.01, 0.1, 1.0],
            sigma_grid: None,
            seed: 33,
            stratified: true,
        };
        let a = cross_validate(&data, 1.0, None, &plan, &SolverConfig::default()).unwrap();
        let b = cross_validate(&data, 1.0, None, &plan, &SolverConfig::default()).unwrap();
        assert_eq!(a.chosen_lambda, b.chosen_lambda);
        for (ca, cb) in a.cells.iter().zip(&b.cells) {
            assert_eq!(ca.fold_errors, cb.fold_errors);
        }
    }

    #[test]
    fn chosen_pair_attains_minimal_mean_error() {
        let data = blobs(30, 0.7, 15);
        let plan = CvPlan {
            folds: 5,
            lambda_grid: log_space(1e-3, 10.0, 7),
            sigma_grid: None,
            seed: 8,
            stratified: true,
        };
        let cv = cross_validate(&data, 1.0, None, &plan, &SolverConfig::default()).unwrap();
        let chosen = cv
            .cells
            .iter()
            .find(|c| c.lambda == cv.chosen_lambda)
            .unwrap();
        for c in &cv.cells {
            assert!(c.mean_error >= chosen.mean_error);
        }
    }

    #[test]
    fn ties_break_toward_larger_lambda() {
        // Perfectly separable data gives many zero-error cells; the largest
        // zero-error lambda must win.
        let data = blobs(40, 5.0, 16);
        let plan = CvPlan {
            folds: 5,
            lambda_grid: vec![0.001, 0.01, 0.1],
            sigma_grid: None,
            seed: 2,
            stratified: true,
        };
        let cv = cross_validate(&data, 1.0, None, &plan, &SolverConfig::default()).unwrap();
        let zero_lambdas: Vec<f64> = cv
            .cells
            .iter()
            .filter(|c| c.mean_error == cv.cells.iter().map(|c| c.mean_error).fold(f64::INFINITY, f64::min))
            .map(|c| c.lambda)
            .collect();
        let max_tied = zero_lambdas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(cv.chosen_lambda, max_tied);
    }

    #[test]
    fn gaussian_kernel_tunes_sigma_too() {
        let data = blobs(24, 1.2, 17);
        let plan = CvPlan {
            folds: 4,
            lambda_grid: vec![0.01, 0.1],
            sigma_grid: Some(vec![0.2, 0.8]),
            seed: 3,
            stratified: true,
        };
        let spec = KernelSpec::Gaussian { sigma: 1.0 };
        let cv =
            cross_validate(&data, 1.0, Some(&spec), &plan, &SolverConfig::default()).unwrap();
        assert_eq!(cv.cells.len(), 4);
        assert!(cv.chosen_sigma.is_some());
        match &cv.model {
            Model::Kernel(m) => match m.kernel {
                KernelSpec::Gaussian { sigma } => assert_eq!(Some(sigma), cv.chosen_sigma),
                _ => panic!("expected gaussian kernel"),
            },
            _ => panic!("expected kernel model"),
        }
    }

    #[test]
    fn sigma_grid_without_gaussian_kernel_is_rejected() {
        let data = blobs(20, 1.0, 18);
        let plan = CvPlan {
            folds: 4,
            lambda_grid: vec![0.1],
            sigma_grid: Some(vec![0.5]),
            seed: 0,
            stratified: true,
        };
        assert!(cross_validate(
            &data,
            1.0,
            Some(&KernelSpec::Linear),
            &plan,
            &SolverConfig::default()
        )
        .is_err());
    }

    #[test]
    fn imbalanced_data_still_folds() {
        // 4 positives among 16: stratification keeps them spread out.
        let mut rng = ChaCha20Rng::seed_from_u64(19);
        let mut x = DMatrix::zeros(16, 2);
        let mut y = DVector::zeros(16);
        for i in 0..16 {
            let label = if i < 4 { 1.0 } else { -1.0 };
            y[i] = label;
            x[(i, 0)] = label + rng.random::<f64>();
            x[(i, 1)] = rng.random::<f64>();
        }
        let data = Dataset::new(x, y).unwrap();
        let plan = CvPlan {
            folds: 4,
            lambda_grid: vec![0.1],
            sigma_grid: None,
            seed: 0,
            stratified: true,
        };
        let cv = cross_validate(&data, 1.0, None, &plan, &SolverConfig::default()).unwrap();
        assert_eq!(cv.cells.len(), 1);
    }

    #[test]
    fn log_space_endpoints() {
        let g = log_space(1e-4, 1e2, 50);
        assert_eq!(g.len(), 50);
        assert!((g[0] - 1e-4).abs() < 1e-18);
        assert!((g[49] - 1e2).abs() < 1e-10);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }
}
