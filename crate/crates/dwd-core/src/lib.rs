//! Generalized distance weighted discrimination (DWD).
//!
//! A binary large-margin classifier family indexed by an exponent `q > 0`:
//! the loss is linear below `q/(q+1)` and decays like `u^-q` above it, so
//! every observation keeps influencing the fit (unlike the SVM hinge).
//! Linear and kernel (RKHS) variants are fit by a majorization-minimization
//! iteration that reuses one symmetric factorization per regularization
//! value, giving monotone objective descent and fast lambda paths.
//!
//! What's here:
//! - [`loss`]: the loss family `V_q`, its derivative, majorization
//!   constants, and the population minimizer
//! - [`linear`] / [`kernel`]: the MM solvers with warm-started lambda paths
//! - [`model`]: prediction, the penalized-to-constrained mapping, and
//!   self-describing model files
//! - [`tuning`]: stratified k-fold cross-validation over lambda (and sigma)
//! - [`datagen`] / [`dataio`]: seeded simulation designs, CSV/sparse
//!   ingestion, train/test splits
//! - [`oracle`] / [`verify`]: independent reference computations and the
//!   runnable check suite built on them
//!
//! ```
//! use dwd_core::{datagen, linear, solver::SolverConfig};
//!
//! let data = datagen::gen_example(1, 100, 10, 42).unwrap();
//! let (model, report) =
//!     linear::fit_linear(&data, 1.0, 0.1, &SolverConfig::default(), None).unwrap();
//! assert!(report.converged);
//! assert!(model.beta[0] > 0.0);
//! ```

pub mod data;
pub mod datagen;
pub mod dataio;
pub mod error;
pub mod kernel;
pub mod linear;
pub mod loss;
pub mod model;
pub mod oracle;
pub mod solver;
pub mod tuning;
pub mod verify;

pub use data::Dataset;
pub use error::{DwdError, Result};
pub use kernel::{KernelModel, KernelSpec};
pub use linear::LinearModel;
pub use loss::LossSpec;
pub use model::Model;
pub use solver::{FitReport, SolverConfig};
