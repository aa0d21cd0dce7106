//! The generalized DWD loss family.
//!
//! For an exponent `q > 0` the loss is
//!
//! ```text
//! V_q(u) = 1 - u                          for u <= q/(q+1)
//! V_q(u) = (1/u^q) * q^q/(q+1)^(q+1)      for u >  q/(q+1)
//! ```
//!
//! It is convex, strictly positive, strictly decreasing, differentiable
//! everywhere, and its derivative is Lipschitz with constant
//! `M = (q+1)^2/q`. The Lipschitz gradient yields the quadratic majorizer
//! that drives the MM solvers in [`crate::linear`] and [`crate::kernel`].
//! As `q -> inf` the loss approaches the SVM hinge `max(1-u, 0)`; `q = 1`
//! recovers the standard DWD loss `1-u` / `1/(4u)`.

use serde::{Deserialize, Serialize};

use crate::error::{DwdError, Result};

/// Multiplier applied to `q/(q+1)` when the population minimizer is
/// requested at a degenerate class probability (`eta` of exactly 0 or 1),
/// where the true minimizer diverges.
pub const SATURATION_MULTIPLIER: f64 = 1e3;

/// An exponent `q > 0` together with the constants derived from it.
///
/// The power-branch coefficients are kept in log space so that large `q`
/// (which makes `q^q/(q+1)^(q+1)` underflow around `q ~ 700` if computed
/// directly) stays finite. Values of `q` above a few hundred remain
/// numerically delicate: the loss itself is well behaved but its second
/// derivative near the branch point grows like `(q+1)^2/q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    q: f64,
    threshold: f64,
    lipschitz: f64,
    /// ln(q^q / (q+1)^(q+1)); value branch is exp(ln_value_coeff - q ln u).
    ln_value_coeff: f64,
    /// (q+1) ln(q/(q+1)); derivative branch is -exp(ln_deriv_coeff - (q+1) ln u).
    ln_deriv_coeff: f64,
}

/// Minimizer of the expected loss at a fixed class probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PopulationMinimizer {
    pub value: f64,
    /// True when `eta` was exactly 0 or 1 and the value was clamped to
    /// `sign * SATURATION_MULTIPLIER * q/(q+1)`.
    pub saturated: bool,
}

impl LossSpec {
    /// Builds the loss for exponent `q`. Fails unless `q` is finite and positive.
    pub fn new(q: f64) -> Result<Self> {
        if !q.is_finite() || q <= 0.0 {
            return Err(DwdError::InvalidParameter(format!(
                "loss exponent q must be a positive finite real, got {q}"
            )));
        }
        let qp1 = q + 1.0;
        Ok(LossSpec {
            q,
            threshold: q / qp1,
            lipschitz: qp1 * qp1 / q,
            ln_value_coeff: q * q.ln() - qp1 * qp1.ln(),
            ln_deriv_coeff: qp1 * (q.ln() - qp1.ln()),
        })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// The branch point `q/(q+1)`, always in (0, 1).
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// The gradient Lipschitz constant `M = (q+1)^2/q`, at least 4 with
    /// equality exactly at `q = 1`.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// Loss value `V_q(u)`. Total on all reals.
    ///
    /// At `u` exactly equal to the branch point both branches agree; the
    /// linear branch is used there (exact, no transcendentals).
    pub fn value(&self, u: f64) -> f64 {
        if u <= self.threshold {
            1.0 - u
        } else {
            (self.ln_value_coeff - self.q * u.ln()).exp()
        }
    }

    /// Derivative `V_q'(u)`, in `[-1, 0)`.
    pub fn derivative(&self, u: f64) -> f64 {
        if u <= self.threshold {
            -1.0
        } else {
            -(self.ln_deriv_coeff - (self.q + 1.0) * u.ln()).exp()
        }
    }

    /// Whether the quadratic surrogate at `t_tilde` dominates the loss at `t`:
    ///
    /// ```text
    /// V_q(t) <= V_q(t~) + V_q'(t~)(t - t~) + M/2 (t - t~)^2
    /// ```
    ///
    /// Holds for all pairs (strictly when `t != t_tilde`); exists as a
    /// testable predicate. A relative slack of 1e-12 absorbs rounding.
    pub fn majorizes(&self, t: f64, t_tilde: f64) -> bool {
        self.majorizes_with_constant(t, t_tilde, self.lipschitz)
    }

    /// Same predicate with an explicit quadratic constant, used by the
    /// verification suite's negative control (a deliberately wrong constant
    /// must make the check fail).
    pub fn majorizes_with_constant(&self, t: f64, t_tilde: f64, m: f64) -> bool {
        let d = t - t_tilde;
        let lhs = self.value(t);
        let rhs = self.value(t_tilde) + self.derivative(t_tilde) * d + 0.5 * m * d * d;
        lhs <= rhs + 1e-12 * rhs.abs().max(1.0)
    }

    /// Expected loss `eta V_q(f) + (1 - eta) V_q(-f)` at class probability `eta`.
    pub fn conditional_risk(&self, eta: f64, f: f64) -> f64 {
        eta * self.value(f) + (1.0 - eta) * self.value(-f)
    }

    /// Minimizer of [`Self::conditional_risk`] over `f` at fixed `eta`:
    ///
    /// ```text
    /// f*(eta) =  q/(q+1) * (eta/(1-eta))^(1/(q+1))   for eta > 1/2
    /// f*(eta) = -q/(q+1) * ((1-eta)/eta)^(1/(q+1))   for eta < 1/2
    /// f*(1/2) = 0
    /// ```
    ///
    /// Its sign equals `sign(eta - 1/2)`, which is the Fisher-consistency
    /// property. At `eta` of exactly 0 or 1 the minimizer diverges; the
    /// returned value is clamped to `sign * 1e3 * q/(q+1)` and flagged.
    pub fn population_minimizer(&self, eta: f64) -> PopulationMinimizer {
        debug_assert!((0.0..=1.0).contains(&eta), "eta must lie in [0, 1]");
        if eta == 0.5 {
            return PopulationMinimizer {
                value: 0.0,
                saturated: false,
            };
        }
        if eta <= 0.0 || eta >= 1.0 {
            let sign = if eta >= 1.0 { 1.0 } else { -1.0 };
            return PopulationMinimizer {
                value: sign * SATURATION_MULTIPLIER * self.threshold,
                saturated: true,
            };
        }
        let exponent = 1.0 / (self.q + 1.0);
        let value = if eta > 0.5 {
            self.threshold * (eta / (1.0 - eta)).powf(exponent)
        } else {
            -self.threshold * ((1.0 - eta) / eta).powf(exponent)
        };
        PopulationMinimizer {
            value,
            saturated: false,
        }
    }
}
