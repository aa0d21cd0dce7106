//! Shared configuration and per-fit diagnostics for the MM solvers.

use serde::Serialize;

use crate::error::{DwdError, Result};

/// Stopping and stability knobs for `fit_linear` / `fit_kernel`.
#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    /// Convergence threshold on the maximum absolute coefficient change
    /// between consecutive MM iterates.
    pub tol: f64,
    /// Iteration cap; hitting it flags the fit as non-converged, it is not fatal.
    pub max_iter: usize,
    /// Extra diagonal jitter added to the system matrix up front, on top of
    /// the automatic escalation policy. Zero by default.
    pub jitter: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-5,
            max_iter: 10_000,
            jitter: 0.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(DwdError::InvalidParameter(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(DwdError::InvalidParameter("max_iter must be >= 1".into()));
        }
        if !(self.jitter.is_finite() && self.jitter >= 0.0) {
            return Err(DwdError::InvalidParameter(format!(
                "jitter must be nonnegative, got {}",
                self.jitter
            )));
        }
        Ok(())
    }
}

/// What happened during one fit.
///
/// `objective_trace[0]` is the objective at the starting point and one entry
/// follows per MM step, so the trace is nonincreasing up to rounding.
#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub iterations: usize,
    pub converged: bool,
    pub objective_trace: Vec<f64>,
    pub final_objective: f64,
    /// Infinity norm of the penalized-objective gradient at the returned
    /// coefficients (the first-order condition residual).
    pub kkt_residual: f64,
    /// Bound factor relating a coefficient step to the gradient:
    /// `kkt_residual <= stationarity_scale * step` at the accepting iterate.
    pub stationarity_scale: f64,
    /// Diagonal jitter that ended up in the factorized system (0 when clean).
    pub jitter_used: f64,
}
