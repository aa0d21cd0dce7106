//! Training data: a dense design matrix, labels in {-1, +1}, and
//! per-observation weights.

use nalgebra::{DMatrix, DVector};

use crate::error::{DwdError, Result};

/// An immutable dataset of `n` observations with `p` features.
///
/// Weights default to all ones; weighted and unweighted fitting share the
/// same code path. Labels are stored as `f64` so they multiply directly
/// into margins.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
    weights: DVector<f64>,
}

impl Dataset {
    /// Builds a dataset with unit weights.
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        let n = x.nrows();
        let weights = DVector::from_element(n, 1.0);
        Self::with_weights(x, y, weights)
    }

    /// Builds a dataset with explicit per-observation weights.
    pub fn with_weights(x: DMatrix<f64>, y: DVector<f64>, weights: DVector<f64>) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(DwdError::InvalidData(format!(
                "design matrix must be non-empty, got {}x{}",
                x.nrows(),
                x.ncols()
            )));
        }
        if y.len() != x.nrows() {
            return Err(DwdError::DimensionMismatch(format!(
                "{} labels for {} rows",
                y.len(),
                x.nrows()
            )));
        }
        if weights.len() != x.nrows() {
            return Err(DwdError::DimensionMismatch(format!(
                "{} weights for {} rows",
                weights.len(),
                x.nrows()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(DwdError::InvalidData(
                "design matrix contains a non-finite entry".into(),
            ));
        }
        if y.iter().any(|&v| v != 1.0 && v != -1.0) {
            return Err(DwdError::InvalidData(
                "labels must be exactly -1 or +1".into(),
            ));
        }
        if weights.iter().any(|&w| !w.is_finite() || w <= 0.0) {
            return Err(DwdError::InvalidData(
                "weights must be strictly positive and finite".into(),
            ));
        }
        Ok(Dataset { x, y, weights })
    }

    /// Replaces the weights by per-class values `w(y_i)`: `w_pos` for
    /// label +1 and `w_neg` for label -1.
    pub fn with_class_weights(mut self, w_pos: f64, w_neg: f64) -> Result<Self> {
        if !(w_pos.is_finite() && w_pos > 0.0 && w_neg.is_finite() && w_neg > 0.0) {
            return Err(DwdError::InvalidParameter(format!(
                "class weights must be positive, got {w_pos}:{w_neg}"
            )));
        }
        for i in 0..self.y.len() {
            self.weights[i] = if self.y[i] > 0.0 { w_pos } else { w_neg };
        }
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    /// (count of -1 labels, count of +1 labels).
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.y.iter().filter(|&&v| v > 0.0).count();
        (self.y.len() - pos, pos)
    }

    pub fn has_both_classes(&self) -> bool {
        let (neg, pos) = self.class_counts();
        neg > 0 && pos > 0
    }

    /// The rows selected by `indices`, in the given order, with their
    /// labels and weights.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(DwdError::InvalidData("empty subset".into()));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.n()) {
            return Err(DwdError::InvalidData(format!(
                "subset index {bad} out of range for n={}",
                self.n()
            )));
        }
        let p = self.p();
        let mut x = DMatrix::zeros(indices.len(), p);
        let mut y = DVector::zeros(indices.len());
        let mut w = DVector::zeros(indices.len());
        for (row, &i) in indices.iter().enumerate() {
            x.row_mut(row).copy_from(&self.x.row(i));
            y[row] = self.y[i];
            w[row] = self.weights[i];
        }
        Ok(Dataset { x, y, weights: w })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Dataset {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, -1.0, 0.0, 0.0, -1.0]);
        let y = DVector::from_vec(vec![1.0, 1.0, -1.0, -1.0]);
        Dataset::new(x, y).unwrap()
    }

    #[test]
    fn construction_defaults_to_unit_weights() {
        let d = toy();
        assert_eq!(d.n(), 4);
        assert_eq!(d.p(), 2);
        assert!(d.weights().iter().all(|&w| w == 1.0));
        assert!(d.has_both_classes());
    }

    #[test]
    fn rejects_bad_labels() {
        let x = DMatrix::from_row_slice(2, 1, &[1.0, 2.0]);
        let y = DVector::from_vec(vec![1.0, 0.0]);
        assert!(matches!(
            Dataset::new(x, y),
            Err(DwdError::InvalidData(_))
        ));
    }

    #[test]
    fn rejects_non_finite_entries() {
        let x = DMatrix::from_row_slice(2, 1, &[1.0, f64::NAN]);
        let y = DVector::from_vec(vec![1.0, -1.0]);
        assert!(Dataset::new(x, y).is_err());
    }

    #[test]
    fn rejects_non_positive_weights() {
        let x = DMatrix::from_row_slice(2, 1, &[1.0, 2.0]);
        let y = DVector::from_vec(vec![1.0, -1.0]);
        let w = DVector::from_vec(vec![1.0, 0.0]);
        assert!(Dataset::with_weights(x, y, w).is_err());
    }

    #[test]
    fn class_weights_follow_labels() {
        let d = toy().with_class_weights(2.0, 0.5).unwrap();
        assert_eq!(d.weights().as_slice(), &[2.0, 2.0, 0.5, 0.5]);
    }

    #[test]
    fn subset_keeps_rows_labels_weights() {
        let d = toy().with_class_weights(2.0, 0.5).unwrap();
        let s = d.subset(&[2, 0]).unwrap();
        assert_eq!(s.n(), 2);
        assert_eq!(s.y().as_slice(), &[-1.0, 1.0]);
        assert_eq!(s.weights().as_slice(), &[0.5, 2.0]);
        assert_eq!(s.x().row(0), d.x().row(2));
    }

    #[test]
    fn subset_rejects_out_of_range() {
        assert!(toy().subset(&[4]).is_err());
        assert!(toy().subset(&[]).is_err());
    }
}
