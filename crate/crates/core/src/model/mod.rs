//! Logistic-regression model: scoring, training, ROC construction and
//! threshold selection.
//!
//! A [`LogitModel`] carries raw-feature-space weights, an intercept and a
//! decision threshold on the probability scale (decision rule: positive when
//! `predict_proba >= threshold`). Models serialize to a flat key-value text
//! document that round-trips every float exactly.

mod roc;
mod train;

pub use roc::{roc, select_threshold_er, RocCurve, RocPoint};
pub use train::{
    ce_gradient, ce_loss, ce_loss_for, train_performance, train_performance_traced, TrainConfig,
    TrainTrace,
};

use std::path::Path;

use ndarray::ArrayView2;

use crate::error::{Error, Result};

/// Smallest probability [`sigmoid`] returns; the largest is `1 - EPSILON/2`.
/// Keeps downstream logs and odds finite even for saturated logits.
pub const PROBABILITY_FLOOR: f64 = f64::MIN_POSITIVE;

/// Numerically stable logistic function, clamped to the open interval
/// (0, 1): never 0, 1 or NaN for finite input, exact for |logit| up to ~700.
pub fn sigmoid(logit: f64) -> f64 {
    let p = if logit >= 0.0 {
        1.0 / (1.0 + (-logit).exp())
    } else {
        let e = logit.exp();
        e / (1.0 + e)
    };
    p.clamp(PROBABILITY_FLOOR, 1.0 - f64::EPSILON / 2.0)
}

/// A fitted logistic model over named features.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogitModel {
    /// Feature names, in the column order the weights refer to.
    pub feature_names: Vec<String>,
    /// Coefficients in raw feature space.
    pub weights: Vec<f64>,
    /// Intercept.
    pub intercept: f64,
    /// Probability cutoff for the positive decision (`p >= threshold`).
    pub threshold: f64,
}

impl LogitModel {
    /// Linear score (log-odds) for one instance.
    pub fn logit(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.weights.len() {
            return Err(Error::data(format!(
                "instance has {} features, model expects {}",
                x.len(),
                self.weights.len()
            )));
        }
        let mut score = self.intercept;
        for (w, v) in self.weights.iter().zip(x) {
            score += w * v;
        }
        Ok(score)
    }

    /// Positive-class probability for one instance, always in (0, 1).
    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        Ok(sigmoid(self.logit(x)?))
    }

    /// Positive-class probabilities for every row of a feature matrix.
    pub fn predict_proba_all(&self, features: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        if features.ncols() != self.weights.len() {
            return Err(Error::data(format!(
                "matrix has {} columns, model expects {}",
                features.ncols(),
                self.weights.len()
            )));
        }
        Ok(features
            .rows()
            .into_iter()
            .map(|row| {
                let mut score = self.intercept;
                for (w, v) in self.weights.iter().zip(row) {
                    score += w * v;
                }
                sigmoid(score)
            })
            .collect())
    }

    /// Hard decisions (`p >= threshold`) for every row.
    pub fn decide_all(&self, features: ArrayView2<'_, f64>) -> Result<Vec<u8>> {
        Ok(self
            .predict_proba_all(features)?
            .into_iter()
            .map(|p| u8::from(p >= self.threshold))
            .collect())
    }

    /// Check that a dataset carries exactly the features this model was
    /// fitted on, in the same order.
    pub(crate) fn ensure_matches(&self, data: &crate::data::Dataset) -> Result<()> {
        if data.feature_names() != self.feature_names.as_slice() {
            return Err(Error::data(format!(
                "dataset features {:?} do not match model features {:?}",
                data.feature_names(),
                self.feature_names
            )));
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        if self.feature_names.len() != self.weights.len() {
            return Err(Error::data(format!(
                "model has {} feature names for {} weights",
                self.feature_names.len(),
                self.weights.len()
            )));
        }
        if self.weights.iter().any(|w| !w.is_finite()) || !self.intercept.is_finite() {
            return Err(Error::data("model has non-finite coefficients"));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::data(format!(
                "model threshold must be in (0, 1), got {}",
                self.threshold
            )));
        }
        Ok(())
    }

    /// Serialize as a flat key-value text document (TOML). Floats are
    /// printed in shortest round-trip form, so parsing the document back
    /// recovers every coefficient bit-for-bit (17 significant digits).
    pub fn to_key_value(&self) -> String {
        toml::to_string(self).expect("model serialization cannot fail")
    }

    /// Parse a model from its key-value text form, validating shape and
    /// finiteness.
    pub fn from_key_value(text: &str) -> Result<Self> {
        let model: LogitModel =
            toml::from_str(text).map_err(|e| Error::data(format!("malformed model file: {e}")))?;
        model.validate()?;
        Ok(model)
    }

    /// Write the key-value form to a file.
    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_key_value())?;
        Ok(())
    }

    /// Load a model from a key-value file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::data(format!("cannot read model `{}`: {e}", path.display())))?;
        Self::from_key_value(&text)
    }
}
