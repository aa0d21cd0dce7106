//! The runnable verification suite: every analytic identity and solver
//! cross-check, reported as machine-readable pass/fail records.
//!
//! Families:
//! - `loss`: finite-difference gradient, Lipschitz bound, quadratic
//!   majorization sweep, convexity sampling, hinge limit, monotonicity in q
//! - `fisher`: closed-form population minimizer vs grid risk minimization
//! - `descent`: objective traces of random linear and kernel fits
//! - `penalized`: MM solutions vs the gradient-descent reference
//! - `constrained`: penalized fits mapped to the constrained form vs the
//!   exhaustive two-dimensional oracle
//! - `bayes`: sanity of the mixture Bayes oracle and its Monte-Carlo rate

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::data::Dataset;
use crate::datagen::gen_mixture;
use crate::error::Result;
use crate::kernel::{fit_kernel, kernel_objective, KernelSpec};
use crate::linear::{fit_linear, objective as linear_objective};
use crate::loss::LossSpec;
use crate::model::to_constrained;
use crate::oracle::{
    bayes_error_mc, constrained_objective, constrained_solve_2d, fisher_grid_check,
    gd_solve_penalized, OracleMode,
};
use crate::solver::SolverConfig;

/// One check outcome. `deviation <= tolerance` iff `pass`.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub family: &'static str,
    pub name: String,
    pub pass: bool,
    pub deviation: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl CheckResult {
    fn from_deviation(
        family: &'static str,
        name: impl Into<String>,
        deviation: f64,
        tolerance: f64,
        detail: impl Into<String>,
    ) -> Self {
        CheckResult {
            family,
            name: name.into(),
            pass: deviation <= tolerance,
            deviation,
            tolerance,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    /// When set, run only the checks of this family.
    pub only: Option<String>,
    /// Multiplier applied to the Lipschitz constant inside the majorization
    /// and Lipschitz checks. 1.0 is the true constant; anything smaller is
    /// a negative control that must make those checks fail.
    pub lipschitz_factor: f64,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            only: None,
            lipschitz_factor: 1.0,
            seed: 0,
        }
    }
}

const VERIFY_QS: [f64; 4] = [0.5, 1.0, 4.0, 8.0];

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

/// Runs the selected checks and returns their records in a fixed order.
pub fn run_verification(opts: &VerifyOptions) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    let wants = |family: &str| match &opts.only {
        Some(f) => f == family,
        None => true,
    };
    if wants("loss") {
        loss_checks(opts, &mut out)?;
    }
    if wants("fisher") {
        fisher_checks(&mut out)?;
    }
    if wants("descent") {
        descent_checks(opts, &mut out)?;
    }
    if wants("penalized") {
        penalized_checks(&mut out)?;
    }
    if wants("constrained") {
        constrained_checks(&mut out)?;
    }
    if wants("bayes") {
        bayes_checks(opts, &mut out)?;
    }
    if out.is_empty() {
        return Err(crate::error::DwdError::InvalidParameter(format!(
            "unknown check family '{}' (expected loss, fisher, descent, penalized, constrained, or bayes)",
            opts.only.as_deref().unwrap_or("")
        )));
    }
    Ok(out)
}

pub fn all_passed(results: &[CheckResult]) -> bool {
    results.iter().all(|r| r.pass)
}

fn loss_checks(opts: &VerifyOptions, out: &mut Vec<CheckResult>) -> Result<()> {
    // Finite-difference gradient; relative away from the branch point,
    // absolute within 1e-5 of it.
    let h = 1e-6;
    let mut fd_dev = 0.0f64;
    for &q in &VERIFY_QS {
        let spec = LossSpec::new(q)?;
        let mut u = -3.0;
        while u <= 6.0 {
            let fd = (spec.value(u + h) - spec.value(u - h)) / (2.0 * h);
            let an = spec.derivative(u);
            let dev = if (u - spec.threshold()).abs() > 1e-5 {
                ((fd - an) / an.abs().max(1e-30)).abs() / 1e-5
            } else {
                (fd - an).abs() / 1e-3
            };
            fd_dev = fd_dev.max(dev);
            u += 0.0173;
        }
    }
    out.push(CheckResult::from_deviation(
        "loss",
        "gradient-finite-difference",
        fd_dev,
        1.0,
        "max deviation as a fraction of its branch tolerance (rel 1e-5 / abs 1e-3)",
    ));

    // Lipschitz bound on the derivative, with the (possibly injected) constant.
    let mut rng = ChaCha20Rng::seed_from_u64(opts.seed.wrapping_add(1));
    let mut lip_dev = 0.0f64;
    for &q in &VERIFY_QS {
        let spec = LossSpec::new(q)?;
        let m = spec.lipschitz() * opts.lipschitz_factor;
        for _ in 0..20_000 {
            let t = rng.random::<f64>() * 12.0 - 4.0;
            let tt = rng.random::<f64>() * 12.0 - 4.0;
            let gap = (spec.derivative(t) - spec.derivative(tt)).abs() - m * (t - tt).abs();
            lip_dev = lip_dev.max(gap);
        }
    }
    out.push(CheckResult::from_deviation(
        "loss",
        "lipschitz-gradient",
        lip_dev,
        1e-12,
        format!("max of |V'(t)-V'(t~)| - M|t-t~| at factor {}", opts.lipschitz_factor),
    ));

    // Quadratic majorization sweep with the (possibly injected) constant.
    let mut rng = ChaCha20Rng::seed_from_u64(opts.seed.wrapping_add(2));
    let mut maj_dev = 0.0f64;
    for _ in 0..100_000 {
        let q = 0.1 + rng.random::<f64>() * 15.9;
        let spec = LossSpec::new(q)?;
        let m = spec.lipschitz() * opts.lipschitz_factor;
        let t = rng.random::<f64>() * 15.0 - 5.0;
        let tt = rng.random::<f64>() * 15.0 - 5.0;
        let d = t - tt;
        let lhs = spec.value(t);
        let rhs = spec.value(tt) + spec.derivative(tt) * d + 0.5 * m * d * d;
        maj_dev = maj_dev.max(lhs - rhs);
    }
    out.push(CheckResult::from_deviation(
        "loss",
        "quadratic-majorization",
        maj_dev,
        1e-12,
        format!(
            "max of V(t) - surrogate over 1e5 random (q,t,t~) at factor {}",
            opts.lipschitz_factor
        ),
    ));

    // Convexity sampling.
    let mut rng = ChaCha20Rng::seed_from_u64(opts.seed.wrapping_add(3));
    let mut convex_dev = 0.0f64;
    for _ in 0..50_000 {
        let q = 0.1 + rng.random::<f64>() * 15.9;
        let spec = LossSpec::new(q)?;
        let t1 = rng.random::<f64>() * 16.0 - 6.0;
        let t2 = rng.random::<f64>() * 16.0 - 6.0;
        let lam = rng.random::<f64>();
        let lhs = spec.value(lam * t1 + (1.0 - lam) * t2);
        let rhs = lam * spec.value(t1) + (1.0 - lam) * spec.value(t2);
        convex_dev = convex_dev.max(lhs - rhs - 1e-12 * rhs.abs().max(1.0));
    }
    out.push(CheckResult::from_deviation(
        "loss",
        "convexity",
        convex_dev,
        0.0,
        "max chord violation over 5e4 samples (1e-12 relative slack)",
    ));

    // Hinge limit at q = 1e3.
    let spec = LossSpec::new(1e3)?;
    let hinge_dev = [-1.0, 0.0, 0.5, 1.0, 2.0]
        .iter()
        .map(|&u| (spec.value(u) - (1.0 - u).max(0.0)).abs())
        .fold(0.0, f64::max);
    out.push(CheckResult::from_deviation(
        "loss",
        "hinge-limit",
        hinge_dev,
        1e-2,
        "max |V_1000(u) - hinge(u)| over u in {-1, 0, 0.5, 1, 2}",
    ));

    // Monotone family in q for u > 0.
    let qs = [0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 64.0];
    let mut mono_dev = 0.0f64;
    let mut u = 0.05;
    while u <= 5.0 {
        let mut prev = f64::INFINITY;
        for &q in &qs {
            let v = LossSpec::new(q)?.value(u);
            mono_dev = mono_dev.max(v - prev);
            prev = v;
        }
        u += 0.05;
    }
    out.push(CheckResult::from_deviation(
        "loss",
        "monotone-in-q",
        mono_dev,
        1e-14,
        "max increase of V_q(u) along increasing q, u > 0",
    ));
    Ok(())
}

fn fisher_checks(out: &mut Vec<CheckResult>) -> Result<()> {
    let grid: Vec<f64> = (1..20)
        .map(|i| i as f64 * 0.05)
        .filter(|&e| (e - 0.5).abs() > 1e-9)
        .collect();
    for &q in &VERIFY_QS {
        let dev = fisher_grid_check(q, &grid)?;
        out.push(CheckResult::from_deviation(
            "fisher",
            format!("population-minimizer-q{q}"),
            dev,
            1e-3,
            "max |grid argmin of risk - closed form| over eta grid (step 0.05)",
        ));
    }
    Ok(())
}

fn descent_checks(opts: &VerifyOptions, out: &mut Vec<CheckResult>) -> Result<()> {
    let config = SolverConfig::default();
    let mut worst = 0.0f64;
    let mut fits = 0usize;
    for (i, &q) in VERIFY_QS.iter().enumerate() {
        for rep in 0..3u64 {
            let data = random_instance(24, 3, opts.seed ^ (1000 + 10 * i as u64 + rep));
            let (_, report) = fit_linear(&data, q, 0.05 * (rep + 1) as f64, &config, None)?;
            for w in report.objective_trace.windows(2) {
                worst = worst.max(w[1] - w[0]);
            }
            fits += 1;
            let data = random_instance(16, 2, opts.seed ^ (2000 + 10 * i as u64 + rep));
            let (_, report) = fit_kernel(
                &data,
                &KernelSpec::Gaussian { sigma: 0.5 },
                q,
                0.05 * (rep + 1) as f64,
                &config,
                None,
            )?;
            for w in report.objective_trace.windows(2) {
                worst = worst.max(w[1] - w[0]);
            }
            fits += 1;
        }
    }
    out.push(CheckResult::from_deviation(
        "descent",
        "objective-trace-nonincreasing",
        worst,
        1e-12,
        format!("max per-step objective increase over {fits} fits"),
    ));
    Ok(())
}

fn penalized_checks(out: &mut Vec<CheckResult>) -> Result<()> {
    let config = SolverConfig {
        tol: 1e-10,
        max_iter: 200_000,
        jitter: 0.0,
    };
    let mut linear_dev = 0.0f64;
    for (seed, q, lambda) in [(301u64, 0.5, 0.2), (302, 1.0, 0.05), (303, 8.0, 0.5)] {
        let data = random_instance(30, 4, seed);
        let (model, _) = fit_linear(&data, q, lambda, &config, None)?;
        let mm = linear_objective(&data, &model)?;
        let gd = gd_solve_penalized(&data, q, lambda, &OracleMode::Linear)?;
        linear_dev = linear_dev.max((mm - gd.objective).abs());
    }
    out.push(CheckResult::from_deviation(
        "penalized",
        "linear-vs-gradient-descent",
        linear_dev,
        1e-6,
        "max |objective(MM) - objective(GD)| over 3 instances",
    ));

    let mut kernel_dev = 0.0f64;
    for (seed, q, lambda) in [(311u64, 1.0, 0.2), (312, 4.0, 0.3)] {
        let data = random_instance(16, 3, seed);
        let spec = KernelSpec::Gaussian { sigma: 2.0 };
        let (model, _) = fit_kernel(&data, &spec, q, lambda, &config, None)?;
        let mm = kernel_objective(&data, &model)?;
        let gd = gd_solve_penalized(&data, q, lambda, &OracleMode::Kernel(spec))?;
        kernel_dev = kernel_dev.max((mm - gd.objective).abs());
    }
    out.push(CheckResult::from_deviation(
        "penalized",
        "kernel-vs-gradient-descent",
        kernel_dev,
        1e-6,
        "max |objective(MM) - objective(GD)| over 2 gaussian instances",
    ));
    Ok(())
}

fn constrained_checks(out: &mut Vec<CheckResult>) -> Result<()> {
    let config = SolverConfig {
        tol: 1e-10,
        max_iter: 200_000,
        jitter: 0.0,
    };
    let mut rel_dev = 0.0f64;
    for (seed, q, lambda) in [(321u64, 1.0, 0.05), (322, 4.0, 0.1)] {
        let data = random_instance(10, 2, seed);
        let (model, _) = fit_linear(&data, q, lambda, &config, None)?;
        let mapped = to_constrained(&model)?;
        let omega: Vec<f64> = mapped.omega.iter().cloned().collect();
        let model_obj = constrained_objective(&data, q, mapped.c, mapped.omega0, &omega);
        let oracle = constrained_solve_2d(&data, q, mapped.c)?;
        rel_dev = rel_dev.max((model_obj - oracle.objective).abs() / oracle.objective.abs());
    }
    out.push(CheckResult::from_deviation(
        "constrained",
        "remark4-round-trip",
        rel_dev,
        1e-3,
        "max relative gap to the exhaustive oracle at c(lambda), 2 instances",
    ));
    Ok(())
}

fn bayes_checks(opts: &VerifyOptions, out: &mut Vec<CheckResult>) -> Result<()> {
    let (_, oracle) = gen_mixture(40, opts.seed.wrapping_add(7))?;
    let (r1, s1) = bayes_error_mc(&oracle, 20_000, opts.seed.wrapping_add(100))?;
    let (r2, s2) = bayes_error_mc(&oracle, 20_000, opts.seed.wrapping_add(101))?;
    let inside = if r1 > 0.0 && r1 < 0.5 {
        0.0
    } else {
        (r1 - 0.25).abs()
    };
    out.push(CheckResult::from_deviation(
        "bayes",
        "rate-in-open-interval",
        inside,
        0.0,
        format!("mixture Bayes rate {r1:.4} must lie in (0, 0.5)"),
    ));
    let combined = (s1 * s1 + s2 * s2).sqrt();
    out.push(CheckResult::from_deviation(
        "bayes",
        "monte-carlo-reproducibility",
        (r1 - r2).abs(),
        3.0 * combined,
        format!("two-seed gap at n_mc=2e4 (rates {r1:.4} / {r2:.4})"),
    ));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_suite_passes() {
        let results = run_verification(&VerifyOptions::default()).unwrap();
        for r in &results {
            assert!(
                r.pass,
                "{}/{} failed: deviation {} > tolerance {} ({})",
                r.family, r.name, r.deviation, r.tolerance, r.detail
            );
        }
        assert!(all_passed(&results));
        // Every family is represented.
        for family in ["loss", "fisher", "descent", "penalized", "constrained", "bayes"] {
            assert!(results.iter().any(|r| r.family == family), "{family}");
        }
    }

    #[test]
    fn only_filter_selects_one_family() {
        let results = run_verification(&VerifyOptions {
            only: Some("fisher".into()),
            ..Default::default()
        })
        .unwrap();
        assert!(!results.is_empty());
        assert!(results.iter().all(|r| r.family == "fisher"));
    }

    #[test]
    fn unknown_family_is_an_error() {
        assert!(run_verification(&VerifyOptions {
            only: Some("nonsense".into()),
            ..Default::default()
        })
        .is_err());
    }

    #[test]
    fn injected_wrong_lipschitz_constant_fails_majorization() {
        let results = run_verification(&VerifyOptions {
            only: Some("loss".into()),
            lipschitz_factor: 0.25,
            seed: 0,
        })
        .unwrap();
        let maj = results
            .iter()
            .find(|r| r.name == "quadratic-majorization")
            .unwrap();
        assert!(!maj.pass, "negative control must fail");
        assert!(!all_passed(&results));
    }
}
