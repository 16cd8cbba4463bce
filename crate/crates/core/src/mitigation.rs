//! Fairness fine-tuning: gradient descent from the performance-optimal
//! coefficients on a differentiable equalized-odds disparity.
//!
//! The objective is `L = (TPR0 - TPR1)^2 + (FPR0 - FPR1)^2` where each rate
//! is the *mean predicted probability* over one (label, group) cell — a
//! smooth stand-in for the thresholded rates, which have zero gradient
//! almost everywhere. Hard (thresholded) rates are available through
//! [`eod_loss`] for evaluation but are rejected as a fine-tuning objective.
//!
//! Guard rails, in the order they act:
//!
//! * an optional cross-entropy anchor `ce_anchor_weight * CE` added to the
//!   objective keeps the coefficients near the performance optimum;
//! * when `early_stop_auroc_drop > 0`, a stratified 20% monitor fold is
//!   carved from the training data *before* fitting; descent runs on the
//!   remaining 80%, and any epoch whose monitor AUROC falls more than the
//!   budget below the starting model's is rolled back and stops the run;
//! * after descent, if the candidate's disparity on the full training set
//!   is no better than the starting model's, the starting model is
//!   returned unchanged (`reverted` is set in the trace).
//!
//! A fine-tuned model gets a fresh decision threshold (closest-to-(0,1) on
//! the full training ROC), since the score distribution has moved.

use ndarray::{Array1, Array2, ArrayView2};

use crate::data::{make_splits, Dataset, SplitPlan, Standardizer, StratifyColumn};
use crate::error::{Error, Result};
use crate::metrics::auroc;
use crate::model::{ce_gradient, ce_loss, roc, select_threshold_er, sigmoid, LogitModel};

/// How group rates are computed by [`eod_loss`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateMode {
    /// Mean predicted probability per (label, group) cell; differentiable.
    Soft,
    /// Thresholded rates; for evaluation only.
    Hard,
}

/// Configuration for [`mitigate`].
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MitigationConfig {
    /// Sensitive attribute whose disparity is minimized.
    pub attribute: String,
    /// Base step size; the line search adapts around it.
    pub learning_rate: f64,
    /// Fine-tuning budget. Exhausting it is a normal stop, not an error.
    pub max_epochs: usize,
    /// Must be [`RateMode::Soft`]; the hard mode has no usable gradient.
    pub rate_mode: RateMode,
    /// Weight of the cross-entropy anchor term; 0 disables it.
    pub ce_anchor_weight: f64,
    /// Largest tolerated AUROC drop on the monitor fold; 0 disables
    /// monitoring (all rows are then used for fitting).
    pub early_stop_auroc_drop: f64,
    /// Seed for the monitor-fold carve.
    pub seed: u64,
}

impl Default for MitigationConfig {
    fn default() -> Self {
        MitigationConfig {
            attribute: String::new(),
            learning_rate: 0.01,
            max_epochs: 2000,
            rate_mode: RateMode::Soft,
            ce_anchor_weight: 0.0,
            early_stop_auroc_drop: 0.02,
            seed: 0,
        }
    }
}

impl MitigationConfig {
    pub(crate) fn validate(&self) -> Result<()> {
        if self.attribute.is_empty() {
            return Err(Error::config(
                "mitigation requires a sensitive attribute name",
            ));
        }
        if self.rate_mode == RateMode::Hard {
            return Err(Error::config(
                "rate_mode = \"hard\" cannot be fine-tuned: thresholded rates are \
                 piecewise constant, so their gradient is zero almost everywhere; \
                 use \"soft\" for mitigation and hard rates for evaluation",
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config(format!(
                "learning_rate must be a positive real, got {}",
                self.learning_rate
            )));
        }
        if self.max_epochs < 1 {
            return Err(Error::config("max_epochs must be >= 1"));
        }
        if !(self.ce_anchor_weight >= 0.0 && self.ce_anchor_weight.is_finite()) {
            return Err(Error::config(format!(
                "ce_anchor_weight must be a non-negative real, got {}",
                self.ce_anchor_weight
            )));
        }
        if !(self.early_stop_auroc_drop >= 0.0 && self.early_stop_auroc_drop.is_finite()) {
            return Err(Error::config(format!(
                "early_stop_auroc_drop must be a non-negative real, got {}",
                self.early_stop_auroc_drop
            )));
        }
        Ok(())
    }
}

/// Why fine-tuning stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Disparity at tolerance, gradient vanished, or no loss-decreasing
    /// step exists.
    Converged,
    /// Epoch budget exhausted.
    MaxEpochs,
    /// Monitor AUROC fell below budget; the step was rolled back.
    EarlyStopped,
}

/// State after one accepted epoch (epoch 0 is the starting model).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TraceRecord {
    pub epoch: usize,
    /// Soft disparity `dTPR^2 + dFPR^2` on the fit fold.
    pub eod_loss: f64,
    /// Soft `TPR(group0) - TPR(group1)` on the fit fold.
    pub tpr_gap: f64,
    /// Soft `FPR(group0) - FPR(group1)` on the fit fold.
    pub fpr_gap: f64,
    /// Mean cross-entropy on the fit fold.
    pub ce_loss: f64,
    /// AUROC on the monitor fold; `None` when monitoring is disabled.
    pub holdout_auroc: Option<f64>,
    /// Objective actually descended: `eod_loss + ce_anchor_weight * ce_loss`.
    pub total_loss: f64,
}

/// Diagnostics from a fine-tuning run.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MitigationTrace {
    pub records: Vec<TraceRecord>,
    pub stop: StopReason,
    /// Accepted epochs (`records.len() - 1`).
    pub epochs: usize,
    /// True when the candidate did not improve the full-training-set
    /// disparity and the starting model was returned instead.
    pub reverted: bool,
}

/// A starting disparity at or below this value means there is nothing real
/// to fix — cell means of a few hundred rows carry sampling noise of this
/// order, and fine-tuning would only chase that noise. The run is a no-op.
const EOD_NOOP_TOL: f64 = 1e-3;
/// Once fine-tuning engages, descent continues until the disparity falls to
/// this much tighter value (or another stop fires): stopping at the entry
/// tolerance would leave most of a real disparity in place.
const EOD_EXIT_TOL: f64 = 1e-5;
/// Objective-gradient infinity norm below this value stops fine-tuning.
const GRAD_TOL: f64 = 1e-7;
/// Fraction of training rows carved off as the monitor fold.
const MONITOR_FRACTION: f64 = 0.2;
const MAX_HALVINGS: usize = 60;
const MAX_STEP: f64 = 1e12;

/// Row indices of the four (label, group) cells.
struct Cells {
    /// [label][group], i.e. `idx[1][0]` holds positives of group 0.
    idx: [[Vec<usize>; 2]; 2],
}

fn build_cells(labels: &[u8], membership: &[u8], attribute: &str) -> Result<Cells> {
    let mut idx: [[Vec<usize>; 2]; 2] = Default::default();
    for (i, (&y, &z)) in labels.iter().zip(membership).enumerate() {
        idx[y as usize][z as usize].push(i);
    }
    for (y, row) in idx.iter().enumerate() {
        for (z, cell) in row.iter().enumerate() {
            if cell.is_empty() {
                return Err(Error::data(format!(
                    "equalized-odds rates are undefined: no rows with label={y} \
                     in group {z} of attribute {attribute:?}"
                )));
            }
        }
    }
    Ok(Cells { idx })
}

fn cell_mean(p: &Array1<f64>, cell: &[usize]) -> f64 {
    cell.iter().map(|&i| p[i]).sum::<f64>() / cell.len() as f64
}

/// (loss, tpr gap, fpr gap) of the soft disparity at given probabilities.
fn soft_parts(p: &Array1<f64>, cells: &Cells) -> (f64, f64, f64) {
    let d_tpr = cell_mean(p, &cells.idx[1][0]) - cell_mean(p, &cells.idx[1][1]);
    let d_fpr = cell_mean(p, &cells.idx[0][0]) - cell_mean(p, &cells.idx[0][1]);
    (d_tpr * d_tpr + d_fpr * d_fpr, d_tpr, d_fpr)
}

fn probabilities(x: &ArrayView2<'_, f64>, w: &Array1<f64>, b: f64) -> Array1<f64> {
    (x.dot(w) + b).mapv(sigmoid)
}

fn soft_grad(x: &ArrayView2<'_, f64>, p: &Array1<f64>, cells: &Cells) -> (Array1<f64>, f64) {
    let (_, d_tpr, d_fpr) = soft_parts(p, cells);
    // dL/dp_i is constant inside each cell: +/- 2 * gap / |cell|, with the
    // sign set by which side of the difference the cell sits on.
    let mut coeff = Array1::zeros(p.len());
    for (y, gap) in [(1usize, d_tpr), (0usize, d_fpr)] {
        for (z, sign) in [(0usize, 1.0), (1usize, -1.0)] {
            let cell = &cells.idx[y][z];
            let c = sign * 2.0 * gap / cell.len() as f64;
            for &i in cell {
                coeff[i] = c;
            }
        }
    }
    // Chain through the sigmoid: dp/dz = p(1-p).
    let upstream = Array1::from_shape_fn(p.len(), |i| coeff[i] * p[i] * (1.0 - p[i]));
    (x.t().dot(&upstream), upstream.sum())
}

fn validate_triplet(n: usize, labels: &[u8], membership: &[u8]) -> Result<()> {
    if labels.len() != n || membership.len() != n {
        return Err(Error::data(format!(
            "feature matrix has {n} rows but {} labels and {} group values",
            labels.len(),
            membership.len()
        )));
    }
    Ok(())
}

/// Soft disparity `dTPR^2 + dFPR^2` of a linear scorer, where rates are
/// mean sigmoid scores per (label, group) cell. Errors if a cell is empty.
pub fn soft_eod_loss(
    features: ArrayView2<'_, f64>,
    labels: &[u8],
    membership: &[u8],
    weights: &[f64],
    intercept: f64,
) -> Result<f64> {
    validate_triplet(features.nrows(), labels, membership)?;
    let cells = build_cells(labels, membership, "<membership>")?;
    let w = Array1::from_vec(weights.to_vec());
    let p = probabilities(&features, &w, intercept);
    Ok(soft_parts(&p, &cells).0)
}

/// Gradient of [`soft_eod_loss`] in the weights and intercept.
pub fn soft_eod_gradient(
    features: ArrayView2<'_, f64>,
    labels: &[u8],
    membership: &[u8],
    weights: &[f64],
    intercept: f64,
) -> Result<(Vec<f64>, f64)> {
    validate_triplet(features.nrows(), labels, membership)?;
    let cells = build_cells(labels, membership, "<membership>")?;
    let w = Array1::from_vec(weights.to_vec());
    let p = probabilities(&features, &w, intercept);
    let (gw, gb) = soft_grad(&features, &p, &cells);
    Ok((gw.to_vec(), gb))
}

/// Equalized-odds disparity loss of a model on a dataset, in the chosen
/// rate mode. Soft mode additionally rejects a fully saturated model (all
/// probabilities within 1e-12 of 0 or 1), whose disparity surface is flat.
pub fn eod_loss(
    model: &LogitModel,
    data: &Dataset,
    attribute: &str,
    mode: RateMode,
) -> Result<f64> {
    model.ensure_matches(data)?;
    let membership = data.sensitive(attribute)?;
    match mode {
        RateMode::Soft => {
            let scores = model.predict_proba_all(data.features())?;
            saturation_guard(&scores)?;
            soft_eod_loss(
                data.features(),
                data.labels(),
                membership,
                &model.weights,
                model.intercept,
            )
        }
        RateMode::Hard => {
            let rates = crate::metrics::confusion_rates(model, data, attribute)?;
            let pair = crate::metrics::eod(&rates)?;
            Ok(2.0 * pair.eod_sq)
        }
    }
}

fn saturation_guard(probabilities: &[f64]) -> Result<()> {
    const EDGE: f64 = 1e-12;
    if probabilities
        .iter()
        .all(|&p| !(EDGE..=1.0 - EDGE).contains(&p))
    {
        return Err(Error::numeric(
            "every predicted probability is saturated (within 1e-12 of 0 or 1); \
             the soft disparity has no usable gradient there",
        ));
    }
    Ok(())
}

/// Carve the monitor fold. Falls back to fitting on everything (without
/// early stopping) when the data cannot be stratified, e.g. a tiny cell.
fn carve_monitor(train: &Dataset, config: &MitigationConfig) -> Result<(Dataset, Option<Dataset>)> {
    if config.early_stop_auroc_drop == 0.0 {
        return Ok((train.clone(), None));
    }
    let plan = SplitPlan {
        train_fraction: 1.0 - MONITOR_FRACTION,
        repeats: 1,
        seed: config.seed,
        stratify_on: vec![
            StratifyColumn::Label,
            StratifyColumn::Sensitive(config.attribute.clone()),
        ],
    };
    match make_splits(train, &plan) {
        Ok(splits) => Ok((
            train.subset(&splits[0].train)?,
            Some(train.subset(&splits[0].test)?),
        )),
        Err(err) => {
            log::warn!(
                "no monitor fold for mitigation ({err}); fitting on all {} rows \
                 without early stopping",
                train.n_rows()
            );
            Ok((train.clone(), None))
        }
    }
}

/// Fine-tune a trained model to reduce equalized-odds disparity on one
/// sensitive attribute. Returns the adjusted model (with a freshly
/// selected threshold) and the descent trace.
///
/// A starting disparity at or below 1e-3 is treated as already fair and the
/// run is a no-op (the model comes back unchanged). Otherwise descent stops
/// at the first of: disparity <= 1e-5, objective gradient <= 1e-7, no
/// loss-decreasing step, epoch budget, or monitor AUROC below budget (that
/// step is rolled back, but stays in the trace). If the result does not
/// improve disparity on the full training set, the starting model is
/// returned and the trace says `reverted`.
pub fn mitigate(
    model: &LogitModel,
    train: &Dataset,
    config: &MitigationConfig,
) -> Result<(LogitModel, MitigationTrace)> {
    config.validate()?;
    model.ensure_matches(train)?;
    let full_membership = train.sensitive(&config.attribute)?;

    let (fit, monitor) = carve_monitor(train, config)?;
    let membership = fit.sensitive(&config.attribute)?.to_vec();
    let labels = fit.labels().to_vec();
    let cells = build_cells(&labels, &membership, &config.attribute)?;

    let standardizer = Standardizer::fit(fit.features());
    let x: Array2<f64> = standardizer.transform(fit.features());
    let (w0, b0) = standardizer.weights_to_standardized(&model.weights, model.intercept);
    let mut w = Array1::from_vec(w0);
    let mut b = b0;
    saturation_guard(probabilities(&x.view(), &w, b).as_slice().unwrap())?;

    let monitor_x = monitor
        .as_ref()
        .map(|m| standardizer.transform(m.features()));
    let monitor_auroc = |w: &Array1<f64>, b: f64| -> Result<Option<f64>> {
        match (&monitor, &monitor_x) {
            (Some(fold), Some(mx)) => {
                let scores = (mx.dot(w) + b).to_vec();
                Ok(Some(auroc(&scores, fold.labels())?))
            }
            _ => Ok(None),
        }
    };

    let lambda = config.ce_anchor_weight;
    // Objective parts at a point: (total, disparity, tpr gap, fpr gap, ce).
    // Cross-entropy is recorded in the trace even when not descended.
    let parts = |w: &Array1<f64>, b: f64| -> (f64, f64, f64, f64, f64) {
        let p = probabilities(&x.view(), w, b);
        let (eod, d_tpr, d_fpr) = soft_parts(&p, &cells);
        let ce = ce_loss(x.view(), &labels, w.as_slice().unwrap(), b, 0.0);
        (eod + lambda * ce, eod, d_tpr, d_fpr, ce)
    };

    let baseline_auroc = monitor_auroc(&w, b)?;
    let mut current = parts(&w, b);
    let mut records = vec![TraceRecord {
        epoch: 0,
        eod_loss: current.1,
        tpr_gap: current.2,
        fpr_gap: current.3,
        ce_loss: current.4,
        holdout_auroc: baseline_auroc,
        total_loss: current.0,
    }];

    // Hysteresis: a run that starts at the noise floor never engages, while
    // an engaged run descends well past that floor before declaring victory.
    let eod_tolerance = if current.1 <= EOD_NOOP_TOL {
        EOD_NOOP_TOL
    } else {
        EOD_EXIT_TOL
    };

    let mut step = config.learning_rate;
    let mut stop = StopReason::MaxEpochs;
    for epoch in 1..=config.max_epochs {
        if current.1 <= eod_tolerance {
            stop = StopReason::Converged;
            break;
        }
        let p = probabilities(&x.view(), &w, b);
        let (mut gw, mut gb) = soft_grad(&x.view(), &p, &cells);
        if lambda > 0.0 {
            let (cw, cb) = ce_gradient(x.view(), &labels, w.as_slice().unwrap(), b, 0.0);
            gw += &(lambda * &Array1::from_vec(cw));
            gb += lambda * cb;
        }
        let grad_norm = gw.iter().fold(gb.abs(), |acc, g| acc.max(g.abs()));
        if grad_norm <= GRAD_TOL {
            stop = StopReason::Converged;
            break;
        }

        step = (step * 2.0).min(MAX_STEP);
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let w_next = &w - &(step * &gw);
            let b_next = b - step * gb;
            let next = parts(&w_next, b_next);
            if !next.0.is_finite() {
                return Err(Error::numeric(format!(
                    "diverging objective ({}) at epoch {epoch}",
                    next.0
                )));
            }
            if next.0 < current.0 {
                accepted = Some((w_next, b_next, next));
                break;
            }
            step /= 2.0;
        }
        let Some((w_next, b_next, next)) = accepted else {
            // Objective at its floating-point floor: nothing left to gain.
            stop = StopReason::Converged;
            break;
        };

        let auroc_now = monitor_auroc(&w_next, b_next)?;
        records.push(TraceRecord {
            epoch,
            eod_loss: next.1,
            tpr_gap: next.2,
            fpr_gap: next.3,
            ce_loss: next.4,
            holdout_auroc: auroc_now,
            total_loss: next.0,
        });
        if let (Some(now), Some(base)) = (auroc_now, baseline_auroc) {
            if now < base - config.early_stop_auroc_drop {
                // Roll back to the last within-budget point; the record of
                // the rejected epoch stays in the trace.
                stop = StopReason::EarlyStopped;
                break;
            }
        }
        w = w_next;
        b = b_next;
        current = next;
    }

    let epochs = records.len() - 1;
    // An early stop rolls back its final recorded epoch, so one fewer
    // step survives than was recorded.
    let steps_kept = if stop == StopReason::EarlyStopped {
        epochs - 1
    } else {
        epochs
    };
    if steps_kept == 0 {
        // No change was kept: hand back the starting model untouched.
        let trace = MitigationTrace {
            records,
            stop,
            epochs,
            reverted: false,
        };
        log::debug!(
            "mitigation for {:?} kept the starting model (stop: {stop:?})",
            config.attribute
        );
        return Ok((model.clone(), trace));
    }

    let (weights, intercept) = standardizer.weights_to_raw(w.as_slice().unwrap(), b);
    // Keep the fine-tune only if it helps where it counts: disparity over
    // the whole training set, not just the fit fold.
    let before = soft_eod_loss(
        train.features(),
        train.labels(),
        full_membership,
        &model.weights,
        model.intercept,
    )?;
    let after = soft_eod_loss(
        train.features(),
        train.labels(),
        full_membership,
        &weights,
        intercept,
    )?;
    if after >= before {
        log::debug!(
            "mitigation for {:?} reverted: training-set disparity {after:.3e} \
             is not below the starting {before:.3e}",
            config.attribute
        );
        let trace = MitigationTrace {
            records,
            stop,
            epochs,
            reverted: true,
        };
        return Ok((model.clone(), trace));
    }

    let mut fair = LogitModel {
        feature_names: model.feature_names.clone(),
        weights,
        intercept,
        threshold: model.threshold,
    };
    let scores = fair.predict_proba_all(train.features())?;
    fair.threshold = select_threshold_er(&roc(&scores, train.labels())?)?;
    log::debug!(
        "mitigation for {:?}: {} epochs, disparity {before:.3e} -> {after:.3e} (stop: {stop:?})",
        config.attribute,
        epochs,
    );
    Ok((
        fair,
        MitigationTrace {
            records,
            stop,
            epochs,
            reverted: false,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate, GeneratorConfig, SensitiveSpec};
    use crate::model::{ce_loss_for, train_performance, TrainConfig};
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;
    use std::collections::BTreeMap;

    fn dataset(xs: &[f64], ys: &[u8], zs: &[u8]) -> Dataset {
        let features = Array2::from_shape_fn((xs.len(), 1), |(i, _)| xs[i]);
        let mut sensitive = BTreeMap::new();
        sensitive.insert("grp".to_string(), zs.to_vec());
        Dataset::new(features, vec!["x".into()], ys.to_vec(), sensitive).unwrap()
    }

    /// Model deciding 1 iff x >= 0.5, with soft probabilities that are far
    /// from saturated.
    fn step_model() -> LogitModel {
        LogitModel {
            feature_names: vec!["x".into()],
            weights: vec![4.0],
            intercept: 0.0,
            threshold: sigmoid(2.0),
        }
    }

    fn planted(n: usize, disparity: f64, seed: u64) -> Dataset {
        generate(&GeneratorConfig {
            n,
            m_informative: 2,
            m_noise: 1,
            sensitive: vec![SensitiveSpec {
                name: "grp".into(),
                group_fraction: 0.5,
            }],
            positive_rate: 0.4,
            disparity_strength: disparity,
            seed,
        })
        .unwrap()
    }

    #[test]
    fn hard_loss_of_known_rate_table() {
        // group 0: TPR 1.0 (both positives at x=1), FPR 0
        // group 1: TPR 0.5 (positives at x=1 and x=0), FPR 0
        let data = dataset(
            &[1.0, 1.0, 0.0, 1.0, 0.0, 0.0],
            &[1, 1, 0, 1, 1, 0],
            &[0, 0, 0, 1, 1, 1],
        );
        let loss = eod_loss(&step_model(), &data, "grp", RateMode::Hard).unwrap();
        assert_eq!(loss, 0.25);
    }

    #[test]
    fn soft_loss_is_zero_iff_cell_means_agree() {
        // Group 1 duplicates group 0 row for row: identical cell means.
        let xs = [1.0, 0.2, -0.4, 1.0, 0.2, -0.4];
        let ys = [1, 1, 0, 1, 1, 0];
        let zs = [0, 0, 0, 1, 1, 1];
        let data = dataset(&xs, &ys, &zs);
        let loss = soft_eod_loss(data.features(), data.labels(), &zs, &[4.0], 0.0).unwrap();
        assert_eq!(loss, 0.0);

        let mut xs2 = xs;
        xs2[3] = 0.9; // nudge one positive of group 1
        let data2 = dataset(&xs2, &ys, &zs);
        let loss2 = soft_eod_loss(data2.features(), data2.labels(), &zs, &[4.0], 0.0).unwrap();
        assert!(loss2 > 0.0);
    }

    #[test]
    fn group_swap_leaves_the_loss_bit_identical() {
        let data = planted(300, 1.0, 3);
        let z: Vec<u8> = data.sensitive("grp").unwrap().to_vec();
        let swapped: Vec<u8> = z.iter().map(|&v| 1 - v).collect();
        let w = [0.6, -0.3, 0.1, 0.2];
        let a = soft_eod_loss(data.features(), data.labels(), &z, &w, -0.4).unwrap();
        let b = soft_eod_loss(data.features(), data.labels(), &swapped, &w, -0.4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn soft_gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 40;
        let m = 3;
        let features = Array2::from_shape_fn((n, m), |_| rng.sample::<f64, _>(StandardNormal));
        let labels: Vec<u8> = (0..n)
            .map(|_| u8::from(rng.random::<f64>() < 0.5))
            .collect();
        let membership: Vec<u8> = (0..n)
            .map(|_| u8::from(rng.random::<f64>() < 0.5))
            .collect();
        let w: Vec<f64> = (0..m)
            .map(|_| rng.sample::<f64, _>(StandardNormal) * 0.5)
            .collect();
        let b = 0.3;

        let (gw, gb) = soft_eod_gradient(features.view(), &labels, &membership, &w, b).unwrap();
        let h = 1e-5;
        let loss_at =
            |w: &[f64], b: f64| soft_eod_loss(features.view(), &labels, &membership, w, b).unwrap();
        for j in 0..m {
            let mut wp = w.clone();
            let mut wm = w.clone();
            wp[j] += h;
            wm[j] -= h;
            let fd = (loss_at(&wp, b) - loss_at(&wm, b)) / (2.0 * h);
            assert!(
                (gw[j] - fd).abs() < 1e-8 + 1e-6 * fd.abs(),
                "feature {j}: analytic {} vs numeric {fd}",
                gw[j]
            );
        }
        let fd_b = (loss_at(&w, b + h) - loss_at(&w, b - h)) / (2.0 * h);
        assert!((gb - fd_b).abs() < 1e-8 + 1e-6 * fd_b.abs());
    }

    #[test]
    fn zero_disparity_input_is_a_no_op() {
        // Group 1 mirrors group 0 exactly, so the starting disparity is 0
        // and the tolerance check fires before any step.
        let half: Vec<f64> = (0..20).map(|i| (i as f64) / 10.0 - 1.0).collect();
        let xs: Vec<f64> = half.iter().chain(&half).copied().collect();
        let ys: Vec<u8> = (0..40).map(|i| u8::from(i % 20 >= 10)).collect();
        let zs: Vec<u8> = (0..40).map(|i| u8::from(i >= 20)).collect();
        let data = dataset(&xs, &ys, &zs);
        let model = step_model();
        let config = MitigationConfig {
            attribute: "grp".into(),
            early_stop_auroc_drop: 0.0,
            ..MitigationConfig::default()
        };
        let (fair, trace) = mitigate(&model, &data, &config).unwrap();
        assert_eq!(fair.weights, model.weights);
        assert_eq!(fair.intercept, model.intercept);
        assert_eq!(fair.threshold, model.threshold);
        assert_eq!(trace.epochs, 0);
        assert_eq!(trace.stop, StopReason::Converged);
        assert!(!trace.reverted);
    }

    #[test]
    fn epoch_zero_records_the_starting_objective() {
        let data = planted(600, 1.5, 11);
        let model = train_performance(&data, &TrainConfig::default()).unwrap();
        let config = MitigationConfig {
            attribute: "grp".into(),
            early_stop_auroc_drop: 0.0, // fit fold == full training set
            max_epochs: 1,
            ..MitigationConfig::default()
        };
        let (_, trace) = mitigate(&model, &data, &config).unwrap();
        let start = &trace.records[0];
        assert_eq!(start.epoch, 0);
        let ce = ce_loss_for(&model, &data).unwrap();
        assert!(
            (start.ce_loss - ce).abs() < 1e-10,
            "{} vs {ce}",
            start.ce_loss
        );
        let eod = eod_loss(&model, &data, "grp", RateMode::Soft).unwrap();
        assert!((start.eod_loss - eod).abs() < 1e-12);
        assert!(start.holdout_auroc.is_none());
    }

    #[test]
    fn huge_anchor_pins_the_coefficients() {
        let data = planted(400, 1.5, 5);
        let model = train_performance(&data, &TrainConfig::default()).unwrap();
        let config = MitigationConfig {
            attribute: "grp".into(),
            ce_anchor_weight: 1e6,
            early_stop_auroc_drop: 0.0,
            ..MitigationConfig::default()
        };
        let (fair, _) = mitigate(&model, &data, &config).unwrap();
        let drift = fair
            .weights
            .iter()
            .zip(&model.weights)
            .map(|(a, b)| (a - b).abs())
            .fold((fair.intercept - model.intercept).abs(), f64::max);
        assert!(drift < 1e-3, "anchored drift {drift}");
    }

    #[test]
    fn descent_reduces_disparity_on_planted_data() {
        let data = planted(1200, 1.5, 7);
        let model = train_performance(&data, &TrainConfig::default()).unwrap();
        let config = MitigationConfig {
            attribute: "grp".into(),
            ..MitigationConfig::default()
        };
        let before = eod_loss(&model, &data, "grp", RateMode::Soft).unwrap();
        assert!(before > EOD_NOOP_TOL, "fixture too fair: {before}");

        let (fair, trace) = mitigate(&model, &data, &config).unwrap();
        assert!(!trace.reverted);
        assert!(trace.epochs > 0);
        for pair in trace.records.windows(2) {
            assert!(
                pair[1].total_loss < pair[0].total_loss,
                "objective rose: {} -> {}",
                pair[0].total_loss,
                pair[1].total_loss
            );
        }
        // Monitoring was on, so every record carries a holdout AUROC.
        assert!(trace.records.iter().all(|r| r.holdout_auroc.is_some()));
        let after = eod_loss(&fair, &data, "grp", RateMode::Soft).unwrap();
        assert!(after < before, "disparity {before} -> {after}");
        assert!(fair.threshold > 0.0 && fair.threshold < 1.0);
    }

    #[test]
    fn hard_mode_cannot_be_fit() {
        let data = planted(200, 1.0, 1);
        let model = step_model(); // wrong arity is irrelevant: config fails first
        let config = MitigationConfig {
            attribute: "grp".into(),
            rate_mode: RateMode::Hard,
            ..MitigationConfig::default()
        };
        let err = mitigate(&model, &data, &config).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(err.to_string().contains("hard"), "{err}");
    }

    #[test]
    fn unknown_attribute_is_rejected() {
        let data = planted(200, 1.0, 1);
        let model = train_performance(&data, &TrainConfig::default()).unwrap();
        let config = MitigationConfig {
            attribute: "ghost".into(),
            ..MitigationConfig::default()
        };
        assert!(matches!(
            mitigate(&model, &data, &config),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn empty_cell_is_reported_by_name() {
        // Group 1 has no positives.
        let data = dataset(&[1.0, 0.0, 0.5, -0.5], &[1, 0, 0, 0], &[0, 0, 1, 1]);
        let config = MitigationConfig {
            attribute: "grp".into(),
            early_stop_auroc_drop: 0.0,
            ..MitigationConfig::default()
        };
        let err = mitigate(&step_model(), &data, &config).unwrap_err();
        assert!(matches!(err, Error::Data(_)));
        let msg = err.to_string();
        assert!(msg.contains("label=1") && msg.contains("group 1"), "{msg}");
    }

    #[test]
    fn saturated_probabilities_are_a_numeric_error() {
        let data = dataset(&[1.0, -1.0, 1.0, -1.0], &[1, 0, 1, 0], &[0, 0, 1, 1]);
        let saturated = LogitModel {
            feature_names: vec!["x".into()],
            weights: vec![1000.0],
            intercept: 0.0,
            threshold: 0.5,
        };
        let err = eod_loss(&saturated, &data, "grp", RateMode::Soft).unwrap_err();
        assert!(matches!(err, Error::Numeric(_)), "{err}");
    }
}
