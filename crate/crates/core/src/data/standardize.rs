//! Feature standardization (zero mean, unit variance).
//!
//! Statistics are computed on the training split and applied unchanged to
//! anything scored later. Training happens in standardized space for
//! conditioning, but fitted models are mapped back to raw-feature space
//! before they leave the trainer, so a [`Standardizer`] never needs to be
//! persisted: both weight-space conversions live here.

use ndarray::{Array2, ArrayView2};

/// Per-column means and standard deviations fitted on one feature matrix.
#[derive(Debug, Clone)]
pub struct Standardizer {
    means: Vec<f64>,
    stds: Vec<f64>,
}

impl Standardizer {
    /// Fit means and population standard deviations (two-pass). Columns with
    /// (near-)zero spread get a unit divisor so constant features pass
    /// through centered instead of exploding.
    pub fn fit(features: ArrayView2<'_, f64>) -> Self {
        let n = features.nrows() as f64;
        let mut means = Vec::with_capacity(features.ncols());
        let mut stds = Vec::with_capacity(features.ncols());
        for j in 0..features.ncols() {
            let column = features.column(j);
            let mean = column.sum() / n;
            let var = column.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let std = var.sqrt();
            means.push(mean);
            stds.push(if std > 1e-12 { std } else { 1.0 });
        }
        Standardizer { means, stds }
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn stds(&self) -> &[f64] {
        &self.stds
    }

    /// Standardize a matrix with the fitted statistics.
    pub fn transform(&self, features: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = features.to_owned();
        for j in 0..out.ncols() {
            let (mean, std) = (self.means[j], self.stds[j]);
            out.column_mut(j).mapv_inplace(|v| (v - mean) / std);
        }
        out
    }

    /// Map weights fitted in standardized space back to raw-feature space,
    /// preserving every score: w_raw[j] = w_std[j] / std[j], with the
    /// intercept absorbing the means.
    pub fn weights_to_raw(&self, weights_std: &[f64], intercept_std: f64) -> (Vec<f64>, f64) {
        let weights_raw: Vec<f64> = weights_std
            .iter()
            .zip(&self.stds)
            .map(|(w, s)| w / s)
            .collect();
        let intercept_raw = intercept_std
            - weights_raw
                .iter()
                .zip(&self.means)
                .map(|(w, m)| w * m)
                .sum::<f64>();
        (weights_raw, intercept_raw)
    }

    /// Inverse of [`Standardizer::weights_to_raw`]: express raw-space weights
    /// in standardized space.
    pub fn weights_to_standardized(
        &self,
        weights_raw: &[f64],
        intercept_raw: f64,
    ) -> (Vec<f64>, f64) {
        let weights_std: Vec<f64> = weights_raw
            .iter()
            .zip(&self.stds)
            .map(|(w, s)| w * s)
            .collect();
        let intercept_std = intercept_raw
            + weights_raw
                .iter()
                .zip(&self.means)
                .map(|(w, m)| w * m)
                .sum::<f64>();
        (weights_std, intercept_std)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn transform_centers_and_scales() {
        let x = array![[1.0, 10.0], [3.0, 10.0], [5.0, 10.0], [7.0, 10.0]];
        let s = Standardizer::fit(x.view());
        assert_abs_diff_eq!(s.means()[0], 4.0);
        assert_eq!(s.stds()[1], 1.0, "constant column falls back to unit std");
        let t = s.transform(x.view());
        let mean0 = t.column(0).sum() / 4.0;
        let var0 = t.column(0).iter().map(|v| v * v).sum::<f64>() / 4.0;
        assert_abs_diff_eq!(mean0, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(var0, 1.0, epsilon = 1e-12);
        assert_eq!(t[[0, 1]], 0.0);
    }

    #[test]
    fn weight_conversions_preserve_scores_and_invert() {
        let x = array![[1.0, -2.0], [3.0, 0.5], [-5.0, 4.0], [2.0, 2.5]];
        let s = Standardizer::fit(x.view());
        let t = s.transform(x.view());
        let (w_std, b_std) = (vec![0.7, -1.2], 0.3);
        let (w_raw, b_raw) = s.weights_to_raw(&w_std, b_std);
        for i in 0..x.nrows() {
            let score_std = w_std[0] * t[[i, 0]] + w_std[1] * t[[i, 1]] + b_std;
            let score_raw = w_raw[0] * x[[i, 0]] + w_raw[1] * x[[i, 1]] + b_raw;
            assert_abs_diff_eq!(score_std, score_raw, epsilon = 1e-12);
        }
        let (w_back, b_back) = s.weights_to_standardized(&w_raw, b_raw);
        assert_abs_diff_eq!(w_back[0], w_std[0], epsilon = 1e-12);
        assert_abs_diff_eq!(w_back[1], w_std[1], epsilon = 1e-12);
        assert_abs_diff_eq!(b_back, b_std, epsilon = 1e-12);
    }
}
