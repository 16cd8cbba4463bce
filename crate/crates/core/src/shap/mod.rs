//! Shapley attributions for linear models against a single background
//! point, plus the rank-based comparison of two models' attributions.
//!
//! Two independent routes compute the same quantity:
//!
//! * [`shapley_linear`] — the closed form. For a linear score and an
//!   interventional value function with one background point, feature `j`
//!   of instance `x` gets exactly `w_j * (x_j - bg_j)`.
//! * [`shapley_bruteforce`] — the defining sum over all `2^m` coalitions,
//!   kept deliberately naive so it can serve as an oracle for the closed
//!   form in tests. Refuses more than 20 features.
//!
//! Attributions live on the logit scale, where the decomposition is exact.
//! The probability scale rescales each instance's attributions
//! proportionally so they sum to `p(x) - p(background)`; when an instance
//! scores identically to the background that difference is 0 and the
//! rescaled attributions are all zero.

mod rank;

pub use rank::{
    aggregate_rankings, compare_rank_maps, compare_rankings, rank_features, run_algorithm_1,
    AggregatedFeatureImportance, Aggregation, Explanation, ImportanceRanking, RankDelta,
    RankDeltaReport, RankedFeature,
};

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::model::{sigmoid, LogitModel};

/// Scale on which attributions are expressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttributionScale {
    /// Additive in the model's linear score; exact.
    Logit,
    /// Attributions rescaled per instance to sum to `p(x) - p(background)`.
    Probability,
}

/// Per-instance, per-feature attributions of a model against a background.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributionMatrix {
    /// `values[[i, j]]` is the contribution of feature `j` to instance `i`.
    pub values: Array2<f64>,
    /// Model output at the background point, on `scale`.
    pub base_value: f64,
    pub scale: AttributionScale,
    pub background: Vec<f64>,
    pub feature_names: Vec<String>,
}

fn check_inputs(
    model: &LogitModel,
    background: &[f64],
    instances: &ArrayView2<'_, f64>,
) -> Result<()> {
    let m = model.weights.len();
    if background.len() != m {
        return Err(Error::data(format!(
            "background has {} values, model expects {m}",
            background.len()
        )));
    }
    if background.iter().any(|v| !v.is_finite()) {
        return Err(Error::data("background contains non-finite values"));
    }
    if instances.ncols() != m {
        return Err(Error::data(format!(
            "instances have {} columns, model expects {m}",
            instances.ncols()
        )));
    }
    if instances.nrows() == 0 {
        return Err(Error::data("no instances to attribute"));
    }
    Ok(())
}

/// Closed-form Shapley attributions of a linear model: feature `j` of
/// instance `i` receives `w_j * (x_ij - background_j)`.
///
/// On the logit scale `base_value + sum(values[i, :])` reproduces the
/// instance's logit exactly (up to rounding); on the probability scale it
/// reproduces `p(x_i)` with `base_value = p(background)`.
pub fn shapley_linear(
    model: &LogitModel,
    background: &[f64],
    instances: ArrayView2<'_, f64>,
    scale: AttributionScale,
) -> Result<AttributionMatrix> {
    check_inputs(model, background, &instances)?;
    let base_logit = model.logit(background)?;
    let mut values = Array2::zeros((instances.nrows(), instances.ncols()));
    for (i, row) in instances.rows().into_iter().enumerate() {
        for (j, (&w, (&x, &bg))) in model
            .weights
            .iter()
            .zip(row.iter().zip(background))
            .enumerate()
        {
            values[[i, j]] = w * (x - bg);
        }
    }
    let base_value = match scale {
        AttributionScale::Logit => base_logit,
        AttributionScale::Probability => {
            for (i, row) in instances.rows().into_iter().enumerate() {
                let logit_sum: f64 = values.row(i).sum();
                let target = sigmoid(model.logit(&row.to_vec())?) - sigmoid(base_logit);
                let ratio = if logit_sum == 0.0 {
                    0.0
                } else {
                    target / logit_sum
                };
                for j in 0..values.ncols() {
                    values[[i, j]] *= ratio;
                }
            }
            sigmoid(base_logit)
        }
    };
    Ok(AttributionMatrix {
        values,
        base_value,
        scale,
        background: background.to_vec(),
        feature_names: model.feature_names.clone(),
    })
}

/// Largest feature count accepted by [`shapley_bruteforce`].
pub const BRUTEFORCE_MAX_FEATURES: usize = 20;

/// Shapley attributions by the defining sum over all coalitions, on the
/// logit scale. Exponential in the feature count; refuses more than
/// [`BRUTEFORCE_MAX_FEATURES`]. Exists as an independent oracle for
/// [`shapley_linear`].
pub fn shapley_bruteforce(
    model: &LogitModel,
    background: &[f64],
    instances: ArrayView2<'_, f64>,
) -> Result<AttributionMatrix> {
    check_inputs(model, background, &instances)?;
    let m = model.weights.len();
    if m > BRUTEFORCE_MAX_FEATURES {
        return Err(Error::config(format!(
            "brute-force attribution enumerates 2^m coalitions and refuses \
             m = {m} > {BRUTEFORCE_MAX_FEATURES} features"
        )));
    }
    let base_logit = model.logit(background)?;

    // Coalition weight by size: |S|! (m - |S| - 1)! / m! = 1 / (m * C(m-1, |S|)).
    let weights_by_size: Vec<f64> = (0..m)
        .map(|k| {
            let mut binom = 1.0;
            for i in 0..k {
                binom = binom * (m - 1 - i) as f64 / (i + 1) as f64;
            }
            1.0 / (m as f64 * binom)
        })
        .collect();

    let mut values = Array2::zeros((instances.nrows(), m));
    let mut coalition_value = vec![0.0f64; 1 << m];
    for (i, row) in instances.rows().into_iter().enumerate() {
        // Value of a coalition: model score with coalition features taken
        // from the instance and the rest from the background. Built
        // incrementally: adding one feature shifts the score by
        // w_j * (x_j - bg_j).
        let shift: Vec<f64> = model
            .weights
            .iter()
            .zip(row.iter().zip(background))
            .map(|(&w, (&x, &bg))| w * (x - bg))
            .collect();
        coalition_value[0] = base_logit;
        for mask in 1..(1usize << m) {
            let low = mask.trailing_zeros() as usize;
            coalition_value[mask] = coalition_value[mask & (mask - 1)] + shift[low];
        }
        for j in 0..m {
            let bit = 1usize << j;
            let mut phi = 0.0;
            for mask in 0..(1usize << m) {
                if mask & bit != 0 {
                    continue;
                }
                let size = mask.count_ones() as usize;
                phi +=
                    weights_by_size[size] * (coalition_value[mask | bit] - coalition_value[mask]);
            }
            values[[i, j]] = phi;
        }
    }
    Ok(AttributionMatrix {
        values,
        base_value: base_logit,
        scale: AttributionScale::Logit,
        background: background.to_vec(),
        feature_names: model.feature_names.clone(),
    })
}
