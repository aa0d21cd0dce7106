//! Prediction, the mapping between the penalized and constrained
//! formulations, and model (de)serialization.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{DwdError, Result};
use crate::kernel::{KernelModel, KernelSpec};
use crate::linear::LinearModel;

/// Either flavor of fitted classifier.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Linear(LinearModel),
    Kernel(KernelModel),
}

impl Model {
    pub fn q(&self) -> f64 {
        match self {
            Model::Linear(m) => m.q,
            Model::Kernel(m) => m.q,
        }
    }

    pub fn lambda(&self) -> f64 {
        match self {
            Model::Linear(m) => m.lambda,
            Model::Kernel(m) => m.lambda,
        }
    }

    pub fn decision_values(&self, xnew: &DMatrix<f64>) -> Result<DVector<f64>> {
        match self {
            Model::Linear(m) => m.decision_values(xnew),
            Model::Kernel(m) => m.decision_values(xnew),
        }
    }

    /// Labels in {-1, +1} by the sign of the decision value; a decision
    /// value of exactly 0 maps to +1 so predictions stay deterministic.
    pub fn predict(&self, xnew: &DMatrix<f64>) -> Result<Vec<f64>> {
        Ok(self
            .decision_values(xnew)?
            .iter()
            .map(|&d| label_of(d))
            .collect())
    }
}

/// Sign convention shared by every prediction path: ties go to +1.
pub fn label_of(decision_value: f64) -> f64 {
    if decision_value >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// A solution of the constrained formulation: a unit normal `omega`, an
/// intercept `omega0`, and the slack budget `c` it is optimal for.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedSolution {
    pub omega0: f64,
    pub omega: DVector<f64>,
    pub c: f64,
}

/// Maps a penalized fit to its constrained counterpart:
///
/// ```text
/// omega  = beta / |beta|
/// omega0 = beta0 / |beta|
/// c      = ((q+1)^(q+1) / q^q) |beta|^(q+1)
/// ```
///
/// The classifier sign is unchanged. Fails when `beta` is all zero (no
/// direction exists; this happens for very large lambda).
pub fn to_constrained(model: &LinearModel) -> Result<ConstrainedSolution> {
    let norm = model.beta.norm();
    if norm == 0.0 {
        return Err(DwdError::DegenerateModel(
            "zero coefficient vector has no direction".into(),
        ));
    }
    let q = model.q;
    let qp1 = q + 1.0;
    // (q+1)^(q+1)/q^q in log space so large q stays finite.
    let c = (qp1 * qp1.ln() - q * q.ln() + qp1 * norm.ln()).exp();
    Ok(ConstrainedSolution {
        omega0: model.beta0 / norm,
        omega: &model.beta / norm,
        c,
    })
}

/// Current on-disk schema version. Files from other versions are rejected
/// with an explicit error rather than silently misread.
pub const MODEL_SCHEMA_VERSION: u64 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    schema_version: u64,
    model_kind: String,
    q: f64,
    lambda: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kernel: Option<KernelSpec>,
    beta0: f64,
    coefficients: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    train_inputs: Option<Vec<Vec<f64>>>,
}

/// Serializes a model to a self-describing JSON document. Numbers round-trip
/// exactly (shortest-representation float formatting).
pub fn model_to_string(model: &Model) -> Result<String> {
    let file = match model {
        Model::Linear(m) => ModelFile {
            schema_version: MODEL_SCHEMA_VERSION,
            model_kind: "linear".into(),
            q: m.q,
            lambda: m.lambda,
            kernel: None,
            beta0: m.beta0,
            coefficients: m.beta.iter().cloned().collect(),
            train_inputs: None,
        },
        Model::Kernel(m) => ModelFile {
            schema_version: MODEL_SCHEMA_VERSION,
            model_kind: "kernel".into(),
            q: m.q,
            lambda: m.lambda,
            kernel: Some(m.kernel),
            beta0: m.beta0,
            coefficients: m.alpha.iter().cloned().collect(),
            train_inputs: Some(
                (0..m.train_inputs.nrows())
                    .map(|i| m.train_inputs.row(i).iter().cloned().collect())
                    .collect(),
            ),
        },
    };
    serde_json::to_string_pretty(&file)
        .map_err(|e| DwdError::Parse(format!("model serialization failed: {e}")))
}

pub fn model_from_str(text: &str) -> Result<Model> {
    let value: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| DwdError::Parse(format!("malformed model file: {e}")))?;
    let found = value
        .get("schema_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| DwdError::Parse("model file lacks a schema_version field".into()))?;
    if found != MODEL_SCHEMA_VERSION {
        return Err(DwdError::SchemaVersion {
            found,
            expected: MODEL_SCHEMA_VERSION,
        });
    }
    let file: ModelFile = serde_json::from_value(value)
        .map_err(|e| DwdError::Parse(format!("malformed model file: {e}")))?;
    match file.model_kind.as_str() {
        "linear" => Ok(Model::Linear(LinearModel {
            beta0: file.beta0,
            beta: DVector::from_vec(file.coefficients),
            q: file.q,
            lambda: file.lambda,
        })),
        "kernel" => {
            let kernel = file
                .kernel
                .ok_or_else(|| DwdError::Parse("kernel model lacks a kernel field".into()))?;
            let rows = file
                .train_inputs
                .ok_or_else(|| DwdError::Parse("kernel model lacks train_inputs".into()))?;
            if rows.is_empty() {
                return Err(DwdError::Parse("kernel model has empty train_inputs".into()));
            }
            let p = rows[0].len();
            if rows.iter().any(|r| r.len() != p) {
                return Err(DwdError::Parse("ragged train_inputs rows".into()));
            }
            if rows.len() != file.coefficients.len() {
                return Err(DwdError::Parse(format!(
                    "{} dual coefficients for {} training rows",
                    file.coefficients.len(),
                    rows.len()
                )));
            }
            let mut train = DMatrix::zeros(rows.len(), p);
            for (i, r) in rows.iter().enumerate() {
                for (j, &v) in r.iter().enumerate() {
                    train[(i, j)] = v;
                }
            }
            Ok(Model::Kernel(KernelModel {
                beta0: file.beta0,
                alpha: DVector::from_vec(file.coefficients),
                kernel,
                q: file.q,
                lambda: file.lambda,
                train_inputs: train,
            }))
        }
        other => Err(DwdError::Parse(format!("unknown model_kind '{other}'"))),
    }
}

pub fn save_model(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, model_to_string(model)?)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model> {
    let text = fs::read_to_string(path)?;
    model_from_str(&text)
}
