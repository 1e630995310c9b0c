use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tabular regression data: an `n x d` feature matrix, a length-`n` target,
/// and optional planar coordinates (meters).
///
/// Features are used as given. Tree models are scale-invariant; the softmax
/// backend standardizes internally.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    features: Array2<f64>,
    target: Array1<f64>,
    coords: Option<Array2<f64>>,
    feature_names: Vec<String>,
    target_name: String,
}

/// Checks shapes and finiteness and builds a [`Dataset`] with default names
/// `x1..xd` and `y`.
pub fn validate_dataset(
    features: Array2<f64>,
    target: Array1<f64>,
    coords: Option<Array2<f64>>,
) -> Result<Dataset> {
    let (n, d) = features.dim();
    if n == 0 {
        return Err(Error::EmptyDataset("no rows"));
    }
    if d == 0 {
        return Err(Error::EmptyDataset("no feature columns"));
    }
    if target.len() != n {
        return Err(Error::DimensionMismatch {
            what: "target length",
            expected: n,
            found: target.len(),
        });
    }
    if let Some(c) = &coords {
        if c.nrows() != n {
            return Err(Error::DimensionMismatch {
                what: "coordinate rows",
                expected: n,
                found: c.nrows(),
            });
        }
        if c.ncols() != 2 {
            return Err(Error::DimensionMismatch {
                what: "coordinate columns",
                expected: 2,
                found: c.ncols(),
            });
        }
        check_finite("coords", c.view())?;
    }
    check_finite("features", features.view())?;
    if let Some(row) = target.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue {
            field: "target",
            row,
            col: 0,
        });
    }

    Ok(Dataset {
        feature_names: (1..=d).map(|j| format!("x{j}")).collect(),
        target_name: "y".to_string(),
        features,
        target,
        coords,
    })
}

fn check_finite(field: &'static str, m: ArrayView2<f64>) -> Result<()> {
    for ((row, col), v) in m.indexed_iter() {
        if !v.is_finite() {
            return Err(Error::NonFiniteValue { field, row, col });
        }
    }
    Ok(())
}

impl Dataset {
    pub fn with_names(mut self, feature_names: Vec<String>, target_name: impl Into<String>) -> Result<Self> {
        if feature_names.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                what: "feature names",
                expected: self.n_features(),
                found: feature_names.len(),
            });
        }
        self.feature_names = feature_names;
        self.target_name = target_name.into();
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }

    pub fn target(&self) -> ArrayView1<'_, f64> {
        self.target.view()
    }

    pub fn coords(&self) -> Option<ArrayView2<'_, f64>> {
        self.coords.as_ref().map(|c| c.view())
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    /// Rows selected by `indices`, in that order. Panics on out-of-range indices.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(Axis(0), indices),
            target: self.target.select(Axis(0), indices),
            coords: self.coords.as_ref().map(|c| c.select(Axis(0), indices)),
            feature_names: self.feature_names.clone(),
            target_name: self.target_name.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn well_formed_input() {
        let ds = validate_dataset(
            array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]],
            array![0.1, 0.2, 0.3],
            None,
        )
        .unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.n_features(), 2);
        assert_eq!(ds.feature_names(), ["x1", "x2"]);
    }

    #[test]
    fn target_length_mismatch() {
        let err = validate_dataset(
            array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]],
            array![0.1, 0.2, 0.3, 0.4],
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 3, found: 4, .. }));
    }

    #[test]
    fn nan_reported_with_position() {
        let err = validate_dataset(
            array![[1.0, 2.0], [f64::NAN, 4.0], [5.0, 6.0]],
            array![0.1, 0.2, 0.3],
            None,
        )
        .unwrap_err();
        assert_eq!(
            err,
            Error::NonFiniteValue {
                field: "features",
                row: 1,
                col: 0
            }
        );
    }

    #[test]
    fn empty_inputs_rejected() {
        let err = validate_dataset(Array2::zeros((0, 2)), Array1::zeros(0), None).unwrap_err();
        assert!(matches!(err, Error::EmptyDataset(_)));
        let err = validate_dataset(Array2::zeros((3, 0)), Array1::zeros(3), None).unwrap_err();
        assert!(matches!(err, Error::EmptyDataset(_)));
    }

    #[test]
    fn coordinate_rows_must_match() {
        let err = validate_dataset(
            array![[1.0], [2.0]],
            array![1.0, 2.0],
            Some(array![[0.0, 0.0]]),
        )
        .unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { what: "coordinate rows", .. }));
    }

    #[test]
    fn subset_keeps_alignment() {
        let ds = validate_dataset(
            array![[1.0], [2.0], [3.0]],
            array![10.0, 20.0, 30.0],
            Some(array![[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]),
        )
        .unwrap();
        let sub = ds.subset(&[2, 0]);
        assert_eq!(sub.target().to_vec(), vec![30.0, 10.0]);
        assert_eq!(sub.row(0)[0], 3.0);
        assert_eq!(sub.coords().unwrap()[[0, 1]], 2.0);
    }
}
