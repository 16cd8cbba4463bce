//! Tabular datasets for binary classification with binary sensitive
//! attributes.
//!
//! A [`Dataset`] owns an n x m feature matrix, one binary label column and
//! one or more named binary sensitive columns. All invariants (finite
//! features, 0/1 labels and groups, unique names, consistent lengths) are
//! checked at construction; once built a dataset is immutable, so views can
//! be shared freely across threads.

mod csv_io;
mod generate;
mod split;
mod standardize;

pub use csv_io::{load_csv, write_csv};
pub use generate::{generate, generate_with_truth, GeneratedTruth, GeneratorConfig, SensitiveSpec};
pub use split::{make_splits, Split, SplitPlan, StratifyColumn};
pub use standardize::Standardizer;

use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// Immutable tabular dataset: features, binary labels, binary sensitive
/// attributes.
///
/// Group convention: for every sensitive column, 1 is the value drawn with
/// probability `group_fraction` by the generator; which group counts as
/// privileged is decided at evaluation time (larger representation, unless
/// overridden).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    feature_names: Vec<String>,
    labels: Vec<u8>,
    sensitive: BTreeMap<String, Vec<u8>>,
}

impl Dataset {
    /// Build a dataset, validating every invariant.
    pub fn new(
        features: Array2<f64>,
        feature_names: Vec<String>,
        labels: Vec<u8>,
        sensitive: BTreeMap<String, Vec<u8>>,
    ) -> Result<Self> {
        let n = features.nrows();
        let m = features.ncols();
        if n < 2 {
            return Err(Error::data(format!("need at least 2 rows, got {n}")));
        }
        if m < 1 {
            return Err(Error::data("need at least 1 feature column"));
        }
        if feature_names.len() != m {
            return Err(Error::data(format!(
                "{} feature names for {} feature columns",
                feature_names.len(),
                m
            )));
        }
        let mut seen = std::collections::BTreeSet::new();
        for name in &feature_names {
            if name.is_empty() {
                return Err(Error::data("empty feature name"));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::data(format!("duplicate feature name `{name}`")));
            }
        }
        for name in sensitive.keys() {
            if name.is_empty() {
                return Err(Error::data("empty sensitive attribute name"));
            }
            if seen.contains(name.as_str()) {
                return Err(Error::data(format!(
                    "sensitive attribute `{name}` collides with a feature name"
                )));
            }
        }
        if labels.len() != n {
            return Err(Error::data(format!(
                "{} labels for {} rows",
                labels.len(),
                n
            )));
        }
        for (i, &y) in labels.iter().enumerate() {
            if y > 1 {
                return Err(Error::data(format!(
                    "label at row {} is {}, expected 0 or 1",
                    i + 1,
                    y
                )));
            }
        }
        for (name, column) in &sensitive {
            if column.len() != n {
                return Err(Error::data(format!(
                    "sensitive column `{name}` has {} values for {} rows",
                    column.len(),
                    n
                )));
            }
            for (i, &zv) in column.iter().enumerate() {
                if zv > 1 {
                    return Err(Error::data(format!(
                        "sensitive column `{name}` at row {} is {}, expected 0 or 1",
                        i + 1,
                        zv
                    )));
                }
            }
        }
        for ((i, j), &v) in features.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::data(format!(
                    "non-finite feature value {} at row {}, column `{}`",
                    v,
                    i + 1,
                    feature_names[j]
                )));
            }
        }
        Ok(Dataset {
            features,
            feature_names,
            labels,
            sensitive,
        })
    }

    /// Number of rows.
    pub fn n_rows(&self) -> usize {
        self.features.nrows()
    }

    /// Number of feature columns.
    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    /// Feature matrix view (n x m).
    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    /// Feature names, in column order.
    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Binary labels (0/1), one per row.
    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// Names of the sensitive attributes, sorted.
    pub fn sensitive_names(&self) -> Vec<&str> {
        self.sensitive.keys().map(String::as_str).collect()
    }

    /// Column for one sensitive attribute.
    pub fn sensitive(&self, name: &str) -> Result<&[u8]> {
        self.sensitive
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::config(format!("unknown sensitive attribute `{name}`")))
    }

    /// All sensitive columns.
    pub fn sensitive_columns(&self) -> &BTreeMap<String, Vec<u8>> {
        &self.sensitive
    }

    /// Per-column feature means; the attribution background summary.
    pub fn feature_means(&self) -> Vec<f64> {
        let n = self.n_rows() as f64;
        (0..self.n_features())
            .map(|j| self.features.column(j).sum() / n)
            .collect()
    }

    /// New dataset containing the given rows, in the given order.
    pub fn subset(&self, rows: &[usize]) -> Result<Dataset> {
        let n = self.n_rows();
        let mut features = Array2::zeros((rows.len(), self.n_features()));
        let mut labels = Vec::with_capacity(rows.len());
        for (out, &r) in rows.iter().enumerate() {
            if r >= n {
                return Err(Error::data(format!(
                    "row index {r} out of bounds for {n} rows"
                )));
            }
            features.row_mut(out).assign(&self.features.row(r));
            labels.push(self.labels[r]);
        }
        let sensitive = self
            .sensitive
            .iter()
            .map(|(name, col)| (name.clone(), rows.iter().map(|&r| col[r]).collect()))
            .collect();
        Dataset::new(features, self.feature_names.clone(), labels, sensitive)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn names(list: &[&str]) -> Vec<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    fn small() -> Dataset {
        let features = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0], [7.0, 8.0]];
        let mut sensitive = BTreeMap::new();
        sensitive.insert("grp".to_string(), vec![0, 1, 0, 1]);
        Dataset::new(features, names(&["a", "b"]), vec![0, 1, 0, 1], sensitive).unwrap()
    }

    #[test]
    fn accessors_reflect_construction() {
        let d = small();
        assert_eq!(d.n_rows(), 4);
        assert_eq!(d.n_features(), 2);
        assert_eq!(d.feature_names(), &["a", "b"]);
        assert_eq!(d.labels(), &[0, 1, 0, 1]);
        assert_eq!(d.sensitive("grp").unwrap(), &[0, 1, 0, 1]);
        assert_eq!(d.feature_means(), vec![4.0, 5.0]);
    }

    #[test]
    fn rejects_single_row() {
        let features = array![[1.0, 2.0]];
        let err = Dataset::new(features, names(&["a", "b"]), vec![0], BTreeMap::new());
        assert!(err.is_err());
    }

    #[test]
    fn rejects_zero_feature_columns() {
        let features = Array2::<f64>::zeros((3, 0));
        let err = Dataset::new(features, vec![], vec![0, 1, 0], BTreeMap::new());
        assert!(matches!(err, Err(Error::Data(_))));
    }

    #[test]
    fn rejects_non_binary_label() {
        let features = array![[1.0], [2.0]];
        let err = Dataset::new(features, names(&["a"]), vec![0, 2], BTreeMap::new());
        let msg = err.unwrap_err().to_string();
        assert!(msg.contains("row 2"), "{msg}");
    }

    #[test]
    fn rejects_non_finite_feature() {
        let features = array![[1.0], [f64::NAN]];
        let err = Dataset::new(features, names(&["a"]), vec![0, 1], BTreeMap::new());
        let msg = err.unwrap_err().to_string();
        assert!(msg.contains("column `a`"), "{msg}");
    }

    #[test]
    fn rejects_duplicate_feature_names() {
        let features = array![[1.0, 2.0], [3.0, 4.0]];
        let err = Dataset::new(features, names(&["a", "a"]), vec![0, 1], BTreeMap::new());
        assert!(err.unwrap_err().to_string().contains("duplicate"));
    }

    #[test]
    fn rejects_sensitive_name_colliding_with_feature() {
        let features = array![[1.0], [2.0]];
        let mut sensitive = BTreeMap::new();
        sensitive.insert("a".to_string(), vec![0, 1]);
        let err = Dataset::new(features, names(&["a"]), vec![0, 1], sensitive);
        assert!(err.is_err());
    }

    #[test]
    fn subset_keeps_row_association() {
        let d = small();
        let s = d.subset(&[3, 0]).unwrap();
        assert_eq!(s.n_rows(), 2);
        assert_eq!(s.labels(), &[1, 0]);
        assert_eq!(s.sensitive("grp").unwrap(), &[1, 0]);
        assert_eq!(s.features()[[0, 0]], 7.0);
        assert_eq!(s.features()[[1, 1]], 2.0);
    }

    #[test]
    fn subset_rejects_out_of_bounds() {
        let d = small();
        assert!(d.subset(&[0, 9]).is_err());
    }
}
