//! Performance-optimal logistic training: full-batch gradient descent on the
//! mean cross-entropy with halving backtracking.
//!
//! Features are standardized internally (statistics from the training data
//! itself) and the optimum is mapped back to raw-feature space, so callers
//! only ever see raw-space models. Weights start at zero — the objective is
//! convex, so initialization cannot change the optimum — and the decision
//! threshold is selected on the training ROC by the closest-to-(0,1) rule.
//!
//! Step control: each epoch first tries twice the last accepted step (the
//! objective is smooth, so the workable step size changes slowly) and halves
//! until the loss strictly decreases. The recorded loss sequence is
//! therefore non-increasing by construction.

use ndarray::{Array1, ArrayView2};

use crate::data::{Dataset, Standardizer};
use crate::error::{Error, Result};
use crate::model::{roc, select_threshold_er, sigmoid, LogitModel};

/// Configuration for [`train_performance`].
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Base step size; the line search adapts around it. Must be > 0.
    pub learning_rate: f64,
    /// Epoch budget; exceeding it without meeting `grad_tolerance` is an
    /// error.
    pub max_epochs: usize,
    /// Convergence criterion: infinity norm of the full gradient
    /// (intercept included), in standardized feature space.
    pub grad_tolerance: f64,
    /// Optional L2 penalty (lambda/2 * ||w||^2, intercept excluded) on the
    /// standardized coefficients; 0 disables it.
    pub l2_penalty: f64,
    /// Reserved for future randomized initialization; training currently
    /// starts from zeros, so the seed does not affect the result.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.1,
            max_epochs: 5000,
            grad_tolerance: 1e-6,
            l2_penalty: 0.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config(format!(
                "learning_rate must be a positive real, got {}",
                self.learning_rate
            )));
        }
        if self.max_epochs < 1 {
            return Err(Error::config("max_epochs must be >= 1"));
        }
        if !(self.grad_tolerance > 0.0 && self.grad_tolerance.is_finite()) {
            return Err(Error::config(format!(
                "grad_tolerance must be a positive real, got {}",
                self.grad_tolerance
            )));
        }
        if !(self.l2_penalty >= 0.0 && self.l2_penalty.is_finite()) {
            return Err(Error::config(format!(
                "l2_penalty must be a non-negative real, got {}",
                self.l2_penalty
            )));
        }
        Ok(())
    }
}

/// Diagnostics from a training run.
#[derive(Debug, Clone)]
pub struct TrainTrace {
    /// Loss after each accepted epoch, starting with the initial loss;
    /// non-increasing by construction.
    pub losses: Vec<f64>,
    /// Gradient infinity norm at the last epoch boundary.
    pub final_grad_inf_norm: f64,
    /// Accepted epochs.
    pub epochs: usize,
}

/// Numerically stable softplus: ln(1 + exp(z)) without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Mean cross-entropy of a linear scorer, plus an optional L2 penalty
/// (`l2/2 * ||w||^2`, intercept excluded).
///
/// Computed through softplus directly from the logits, so the value is
/// finite for any finite weights.
pub fn ce_loss(
    features: ArrayView2<'_, f64>,
    labels: &[u8],
    weights: &[f64],
    intercept: f64,
    l2: f64,
) -> f64 {
    let n = features.nrows();
    let mut total = 0.0;
    for (row, &y) in features.rows().into_iter().zip(labels) {
        let mut z = intercept;
        for (w, v) in weights.iter().zip(row) {
            z += w * v;
        }
        // CE contribution: softplus(z) - y*z  ==  -[y ln p + (1-y) ln(1-p)].
        total += softplus(z) - f64::from(y) * z;
    }
    total / n as f64 + 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>()
}

/// Gradient of [`ce_loss`] in the weights and intercept.
pub fn ce_gradient(
    features: ArrayView2<'_, f64>,
    labels: &[u8],
    weights: &[f64],
    intercept: f64,
    l2: f64,
) -> (Vec<f64>, f64) {
    let n = features.nrows();
    let m = features.ncols();
    let mut grad_w = vec![0.0; m];
    let mut grad_b = 0.0;
    for (row, &y) in features.rows().into_iter().zip(labels) {
        let mut z = intercept;
        for (w, v) in weights.iter().zip(row) {
            z += w * v;
        }
        let residual = sigmoid(z) - f64::from(y);
        for (g, v) in grad_w.iter_mut().zip(row) {
            *g += residual * v;
        }
        grad_b += residual;
    }
    for (g, w) in grad_w.iter_mut().zip(weights) {
        *g = *g / n as f64 + l2 * w;
    }
    (grad_w, grad_b / n as f64)
}

/// Mean cross-entropy of a fitted model on a dataset (no penalty), in raw
/// feature space. The dataset's feature names must match the model's.
pub fn ce_loss_for(model: &LogitModel, data: &Dataset) -> Result<f64> {
    model.ensure_matches(data)?;
    Ok(ce_loss(
        data.features(),
        data.labels(),
        &model.weights,
        model.intercept,
        0.0,
    ))
}

const MAX_HALVINGS: usize = 60;
const MAX_STEP: f64 = 1e12;

/// Train the performance-optimal model: minimize mean cross-entropy, then
/// select the decision threshold on the training ROC. Returns the fitted
/// model and its descent diagnostics.
pub fn train_performance_traced(
    data: &Dataset,
    config: &TrainConfig,
) -> Result<(LogitModel, TrainTrace)> {
    config.validate()?;
    let labels = data.labels();
    let positives = labels.iter().filter(|&&y| y == 1).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::data(
            "training requires both label values to be present",
        ));
    }

    let standardizer = Standardizer::fit(data.features());
    let x = standardizer.transform(data.features());
    let l2 = config.l2_penalty;
    let loss = |w: &Array1<f64>, b: f64| ce_loss(x.view(), labels, w.as_slice().unwrap(), b, l2);

    let mut w: Array1<f64> = Array1::zeros(data.n_features());
    let mut b = 0.0;
    let mut current = loss(&w, b);
    let mut losses = vec![current];
    let mut step = config.learning_rate;
    let mut final_grad = f64::INFINITY;
    let mut converged = false;
    for epoch in 0..config.max_epochs {
        let (gw, gb) = ce_gradient(x.view(), labels, w.as_slice().unwrap(), b, l2);
        final_grad = gw.iter().fold(gb.abs(), |acc, g| acc.max(g.abs()));
        if final_grad <= config.grad_tolerance {
            converged = true;
            break;
        }
        let gw = Array1::from_vec(gw);
        step = (step * 2.0).min(MAX_STEP);
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let w_next = &w - &(step * &gw);
            let b_next = b - step * gb;
            let next = loss(&w_next, b_next);
            if !next.is_finite() {
                return Err(Error::numeric(format!(
                    "diverging loss ({next}) at epoch {epoch}"
                )));
            }
            if next < current {
                w = w_next;
                b = b_next;
                current = next;
                accepted = true;
                break;
            }
            step /= 2.0;
        }
        if !accepted {
            // The loss is at its floating-point floor but the gradient
            // criterion was not met: fail honestly rather than return a
            // model that misses the requested tolerance.
            return Err(Error::numeric(format!(
                "no loss-decreasing step exists at epoch {epoch} (loss floor) while \
                 gradient inf-norm {final_grad:.3e} exceeds tolerance {:.3e}",
                config.grad_tolerance
            )));
        }
        losses.push(current);
    }
    if !converged {
        return Err(Error::numeric(format!(
            "training did not converge within {} epochs: final gradient inf-norm {:.6e} > tolerance {:.1e}",
            config.max_epochs, final_grad, config.grad_tolerance
        )));
    }
    let (w_std, b_std) = (w, b);

    let (weights, intercept) = standardizer.weights_to_raw(w_std.as_slice().unwrap(), b_std);
    let mut model = LogitModel {
        feature_names: data.feature_names().to_vec(),
        weights,
        intercept,
        threshold: 0.5, // replaced below by the ER selection
    };
    let scores = model.predict_proba_all(data.features())?;
    model.threshold = select_threshold_er(&roc(&scores, labels)?)?;

    let epochs = losses.len() - 1;
    log::debug!(
        "trained on {} rows x {} features: {} epochs, loss {:.6}, grad {:.2e}",
        data.n_rows(),
        data.n_features(),
        epochs,
        losses.last().unwrap(),
        final_grad
    );
    Ok((
        model,
        TrainTrace {
            losses,
            final_grad_inf_norm: final_grad,
            epochs,
        },
    ))
}

/// [`train_performance_traced`] without the diagnostics.
pub fn train_performance(data: &Dataset, config: &TrainConfig) -> Result<LogitModel> {
    train_performance_traced(data, config).map(|(model, _)| model)
}
