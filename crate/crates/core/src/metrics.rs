//! Model evaluation: AUROC, thresholded confusion rates per sensitive
//! group, and equalized-odds disparity summaries.
//!
//! The two disparity summaries are kept side by side throughout:
//! `eod_abs = (|dTPR| + |dFPR|) / 2` reads as an average rate gap and is
//! the headline number, while `eod_sq = (dTPR^2 + dFPR^2) / 2` matches the
//! differentiable objective the mitigation step minimizes, so trace values
//! and reported values can be compared directly.

use std::collections::BTreeMap;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{roc, LogitModel};

/// Area under the ROC curve (trapezoid rule over the curve of
/// [`roc`]). Errors if either class is absent.
pub fn auroc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    Ok(roc(scores, labels)?.auc())
}

/// Thresholded error rates of one group. Rates are `None` when the group
/// has no members of the relevant class.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GroupRate {
    /// True-positive rate: decisions of 1 among members with label 1.
    pub tpr: Option<f64>,
    /// False-positive rate: decisions of 1 among members with label 0.
    pub fpr: Option<f64>,
    /// Members with label 1.
    pub positives: usize,
    /// Members with label 0.
    pub negatives: usize,
}

/// Rates for the two values of a binary sensitive attribute.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GroupRates {
    pub group0: GroupRate,
    pub group1: GroupRate,
}

/// Equalized-odds disparity between two groups, in both conventions.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EodPair {
    /// `(|dTPR| + |dFPR|) / 2`.
    pub eod_abs: f64,
    /// `(dTPR^2 + dFPR^2) / 2`.
    pub eod_sq: f64,
}

/// Disparity of a pair of group rates. Errors if any of the four rates is
/// undefined (a group without positives or without negatives).
pub fn eod(rates: &GroupRates) -> Result<EodPair> {
    let take = |value: Option<f64>, what: &str, group: u8| {
        value.ok_or_else(|| {
            Error::data(format!(
                "equalized-odds disparity is undefined: group {group} has no \
                 {what}, so its rate has no denominator"
            ))
        })
    };
    let d_tpr = take(rates.group0.tpr, "positives", 0)? - take(rates.group1.tpr, "positives", 1)?;
    let d_fpr = take(rates.group0.fpr, "negatives", 0)? - take(rates.group1.fpr, "negatives", 1)?;
    Ok(EodPair {
        eod_abs: (d_tpr.abs() + d_fpr.abs()) / 2.0,
        eod_sq: (d_tpr * d_tpr + d_fpr * d_fpr) / 2.0,
    })
}

/// Hard-decision confusion rates per group of one sensitive attribute,
/// using the model's stored threshold.
pub fn confusion_rates(model: &LogitModel, data: &Dataset, attribute: &str) -> Result<GroupRates> {
    model.ensure_matches(data)?;
    let membership = data.sensitive(attribute)?;
    let decisions = model.decide_all(data.features())?;
    let rate_for = |group: u8| {
        let mut tp = 0usize;
        let mut positives = 0usize;
        let mut fp = 0usize;
        let mut negatives = 0usize;
        for ((&z, &y), &d) in membership.iter().zip(data.labels()).zip(&decisions) {
            if z != group {
                continue;
            }
            if y == 1 {
                positives += 1;
                tp += usize::from(d == 1);
            } else {
                negatives += 1;
                fp += usize::from(d == 1);
            }
        }
        GroupRate {
            tpr: (positives > 0).then(|| tp as f64 / positives as f64),
            fpr: (negatives > 0).then(|| fp as f64 / negatives as f64),
            positives,
            negatives,
        }
    };
    Ok(GroupRates {
        group0: rate_for(0),
        group1: rate_for(1),
    })
}

/// Fairness block of an evaluation, for one sensitive attribute.
///
/// Signed gaps are privileged minus unprivileged, so a positive `tpr_gap`
/// means the privileged group receives correct positive decisions more
/// often. Gap and disparity fields are `None` when a group/class cell is
/// empty.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AttributeFairness {
    /// Group value treated as privileged for gap signs.
    pub privileged_group: u8,
    pub rates: GroupRates,
    pub tpr_gap: Option<f64>,
    pub fpr_gap: Option<f64>,
    pub eod_abs: Option<f64>,
    pub eod_sq: Option<f64>,
}

/// Evaluation of one model on one dataset.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EvalReport {
    pub n_test: usize,
    pub auroc: f64,
    /// Overall true-positive rate at the model threshold.
    pub sensitivity: f64,
    /// Overall true-negative rate at the model threshold.
    pub specificity: f64,
    /// Fairness block per sensitive attribute, keyed by attribute name.
    pub attributes: BTreeMap<String, AttributeFairness>,
}

/// Evaluate a model, taking the privileged group of each attribute to be
/// the more populous one (ties go to group 1).
pub fn evaluate(model: &LogitModel, data: &Dataset) -> Result<EvalReport> {
    evaluate_with_privileged(model, data, &BTreeMap::new())
}

/// [`evaluate`] with explicit privileged-group choices for some or all
/// attributes; attributes not named fall back to the populosity rule.
pub fn evaluate_with_privileged(
    model: &LogitModel,
    data: &Dataset,
    privileged: &BTreeMap<String, u8>,
) -> Result<EvalReport> {
    model.ensure_matches(data)?;
    for (name, &group) in privileged {
        if !data.sensitive_names().contains(&name.as_str()) {
            return Err(Error::config(format!(
                "privileged-group override names unknown sensitive attribute {name:?}"
            )));
        }
        if group > 1 {
            return Err(Error::config(format!(
                "privileged group for {name:?} must be 0 or 1, got {group}"
            )));
        }
    }

    let scores = model.predict_proba_all(data.features())?;
    let auroc = auroc(&scores, data.labels())?;
    let decisions: Vec<u8> = scores
        .iter()
        .map(|&p| u8::from(p >= model.threshold))
        .collect();
    let mut tp = 0usize;
    let mut tn = 0usize;
    let mut positives = 0usize;
    for (&y, &d) in data.labels().iter().zip(&decisions) {
        if y == 1 {
            positives += 1;
            tp += usize::from(d == 1);
        } else {
            tn += usize::from(d == 0);
        }
    }
    let negatives = data.n_rows() - positives;

    let mut attributes = BTreeMap::new();
    for name in data.sensitive_names() {
        let rates = confusion_rates(model, data, name)?;
        let privileged_group = match privileged.get(name) {
            Some(&g) => g,
            None => {
                let size0 = rates.group0.positives + rates.group0.negatives;
                let size1 = rates.group1.positives + rates.group1.negatives;
                u8::from(size1 >= size0)
            }
        };
        let orient = |g0: Option<f64>, g1: Option<f64>| match (g0, g1) {
            (Some(a), Some(b)) => Some(if privileged_group == 0 { a - b } else { b - a }),
            _ => None,
        };
        let tpr_gap = orient(rates.group0.tpr, rates.group1.tpr);
        let fpr_gap = orient(rates.group0.fpr, rates.group1.fpr);
        let pair = eod(&rates).ok();
        attributes.insert(
            name.to_string(),
            AttributeFairness {
                privileged_group,
                rates,
                tpr_gap,
                fpr_gap,
                eod_abs: pair.map(|p| p.eod_abs),
                eod_sq: pair.map(|p| p.eod_sq),
            },
        );
    }

    Ok(EvalReport {
        n_test: data.n_rows(),
        auroc,
        sensitivity: tp as f64 / positives as f64,
        specificity: tn as f64 / negatives as f64,
        attributes,
    })
}

/// Mean and population standard deviation of the values from the splits
/// that defined the statistic.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    /// Splits that contributed a value.
    pub n: usize,
}

impl MeanStd {
    /// `None` when no values are available.
    pub fn from_values(values: &[f64]) -> Option<MeanStd> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Some(MeanStd {
            mean,
            std: var.sqrt(),
            n: values.len(),
        })
    }
}

/// Cross-split aggregate of one attribute's fairness numbers.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AttributeAggregate {
    pub eod_abs: Option<MeanStd>,
    pub eod_sq: Option<MeanStd>,
    pub tpr_gap: Option<MeanStd>,
    pub fpr_gap: Option<MeanStd>,
}

/// Cross-split aggregate of evaluation reports.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AggregateReport {
    pub n_splits: usize,
    pub auroc: MeanStd,
    pub sensitivity: MeanStd,
    pub specificity: MeanStd,
    pub attributes: BTreeMap<String, AttributeAggregate>,
}

/// Aggregate per-split evaluations. Attribute statistics average over the
/// splits where they were defined; `n` inside each [`MeanStd`] records how
/// many that was.
pub fn aggregate(reports: &[EvalReport]) -> Result<AggregateReport> {
    if reports.is_empty() {
        return Err(Error::data("cannot aggregate zero evaluation reports"));
    }
    let collect = |f: &dyn Fn(&EvalReport) -> f64| {
        let values: Vec<f64> = reports.iter().map(f).collect();
        MeanStd::from_values(&values).unwrap()
    };
    let mut names: Vec<&String> = reports.iter().flat_map(|r| r.attributes.keys()).collect();
    names.sort();
    names.dedup();
    let mut attributes = BTreeMap::new();
    for name in names {
        let field = |f: &dyn Fn(&AttributeFairness) -> Option<f64>| {
            let values: Vec<f64> = reports
                .iter()
                .filter_map(|r| r.attributes.get(name).and_then(f))
                .collect();
            MeanStd::from_values(&values)
        };
        attributes.insert(
            name.clone(),
            AttributeAggregate {
                eod_abs: field(&|a| a.eod_abs),
                eod_sq: field(&|a| a.eod_sq),
                tpr_gap: field(&|a| a.tpr_gap),
                fpr_gap: field(&|a| a.fpr_gap),
            },
        );
    }
    Ok(AggregateReport {
        n_splits: reports.len(),
        auroc: collect(&|r| r.auroc),
        sensitivity: collect(&|r| r.sensitivity),
        specificity: collect(&|r| r.specificity),
        attributes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use proptest::prelude::*;

    fn rates(tpr0: f64, tpr1: f64, fpr0: f64, fpr1: f64) -> GroupRates {
        GroupRates {
            group0: GroupRate {
                tpr: Some(tpr0),
                fpr: Some(fpr0),
                positives: 10,
                negatives: 10,
            },
            group1: GroupRate {
                tpr: Some(tpr1),
                fpr: Some(fpr1),
                positives: 10,
                negatives: 10,
            },
        }
    }

    #[test]
    fn disparity_of_known_rate_table() {
        // TPRs 0.8 vs 0.6 and equal FPRs: abs = (0.2 + 0)/2, sq = 0.04/2.
        let pair = eod(&rates(0.8, 0.6, 0.3, 0.3)).unwrap();
        assert!((pair.eod_abs - 0.1).abs() < 1e-15, "{}", pair.eod_abs);
        assert!((pair.eod_sq - 0.02).abs() < 1e-15, "{}", pair.eod_sq);
        // Gap pair (0.05, 0.09) averages to 0.07.
        let pair = eod(&rates(0.55, 0.5, 0.29, 0.2)).unwrap();
        assert!((pair.eod_abs - 0.07).abs() < 1e-15);
    }

    #[test]
    fn disparity_requires_all_four_rates() {
        let mut r = rates(0.8, 0.6, 0.3, 0.3);
        r.group1.tpr = None;
        let err = eod(&r).unwrap_err();
        assert!(err.to_string().contains("group 1"), "{err}");
    }

    #[test]
    fn mean_std_of_two_values() {
        let ms = MeanStd::from_values(&[0.8, 0.9]).unwrap();
        assert!((ms.mean - 0.85).abs() < 1e-15);
        assert!((ms.std - 0.05).abs() < 1e-15);
        assert_eq!(ms.n, 2);
        assert!(MeanStd::from_values(&[]).is_none());
    }

    #[test]
    fn auroc_of_frozen_example() {
        let scores = [0.1, 0.4, 0.35, 0.8];
        let labels = [0, 0, 1, 1];
        assert_eq!(auroc(&scores, &labels).unwrap(), 0.75);
    }

    /// Model deciding 1 iff the single feature is >= 0.5.
    fn step_model() -> LogitModel {
        LogitModel {
            feature_names: vec!["x".into()],
            weights: vec![4.0],
            intercept: 0.0,
            threshold: crate::model::sigmoid(2.0),
        }
    }

    /// One feature, labels, and a sensitive attribute laid out so the
    /// confusion cells are easy to count by hand.
    fn eval_fixture() -> Dataset {
        // group 0: y=1 at x=1 (decide 1), y=1 at x=0 (decide 0),
        //          y=0 at x=0, x=0 (decide 0)        -> TPR 0.5, FPR 0.0
        // group 1: y=1 at x=1 (decide 1),
        //          y=0 at x=1 (decide 1), y=0 at x=0 -> TPR 1.0, FPR 0.5
        let xs = [1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0];
        let ys = vec![1, 1, 0, 0, 1, 0, 0];
        let zs = vec![0, 0, 0, 0, 1, 1, 1];
        let features = Array2::from_shape_fn((7, 1), |(i, _)| xs[i]);
        let mut sensitive = BTreeMap::new();
        sensitive.insert("grp".to_string(), zs);
        Dataset::new(features, vec!["x".into()], ys, sensitive).unwrap()
    }

    #[test]
    fn evaluation_counts_the_confusion_cells() {
        let report = evaluate(&step_model(), &eval_fixture()).unwrap();
        assert_eq!(report.n_test, 7);
        // 2 of 3 positives decided 1; 3 of 4 negatives decided 0.
        assert!((report.sensitivity - 2.0 / 3.0).abs() < 1e-15);
        assert!((report.specificity - 0.75).abs() < 1e-15);
        let fair = &report.attributes["grp"];
        // Group 0 has 4 members vs 3: privileged by representation.
        assert_eq!(fair.privileged_group, 0);
        assert_eq!(fair.rates.group0.tpr, Some(0.5));
        assert_eq!(fair.rates.group0.fpr, Some(0.0));
        assert_eq!(fair.rates.group1.tpr, Some(1.0));
        assert_eq!(fair.rates.group1.fpr, Some(0.5));
        // Signed gaps are privileged (group 0) minus group 1.
        assert_eq!(fair.tpr_gap, Some(-0.5));
        assert_eq!(fair.fpr_gap, Some(-0.5));
        assert_eq!(fair.eod_abs, Some(0.5));
        assert_eq!(fair.eod_sq, Some(0.25));
    }

    #[test]
    fn privileged_override_flips_gap_signs_only() {
        let data = eval_fixture();
        let base = evaluate(&step_model(), &data).unwrap();
        let mut overrides = BTreeMap::new();
        overrides.insert("grp".to_string(), 1u8);
        let flipped = evaluate_with_privileged(&step_model(), &data, &overrides).unwrap();
        let (a, b) = (&base.attributes["grp"], &flipped.attributes["grp"]);
        assert_eq!(b.privileged_group, 1);
        assert_eq!(a.tpr_gap.unwrap(), -b.tpr_gap.unwrap());
        assert_eq!(a.fpr_gap.unwrap(), -b.fpr_gap.unwrap());
        assert_eq!(a.eod_abs, b.eod_abs);

        overrides.insert("ghost".to_string(), 0u8);
        assert!(matches!(
            evaluate_with_privileged(&step_model(), &data, &overrides),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn aggregation_averages_defined_values() {
        let data = eval_fixture();
        let a = evaluate(&step_model(), &data).unwrap();
        let mut b = a.clone();
        b.auroc = a.auroc - 0.1;
        b.attributes.get_mut("grp").unwrap().eod_abs = None;
        let agg = aggregate(&[a.clone(), b]).unwrap();
        assert_eq!(agg.n_splits, 2);
        assert!((agg.auroc.mean - (a.auroc - 0.05)).abs() < 1e-12);
        // Only one split contributed a defined disparity.
        let grp = &agg.attributes["grp"];
        assert_eq!(grp.eod_abs.unwrap().n, 1);
        assert_eq!(grp.eod_abs.unwrap().mean, 0.5);
        assert!(aggregate(&[]).is_err());
    }

    proptest! {
        /// Swapping the group labels never changes the disparity, and both
        /// conventions stay within their algebraic ranges.
        #[test]
        fn disparity_is_symmetric_and_bounded(
            tpr0 in 0.0f64..=1.0, tpr1 in 0.0f64..=1.0,
            fpr0 in 0.0f64..=1.0, fpr1 in 0.0f64..=1.0,
        ) {
            let forward = eod(&rates(tpr0, tpr1, fpr0, fpr1)).unwrap();
            let swapped = eod(&rates(tpr1, tpr0, fpr1, fpr0)).unwrap();
            prop_assert_eq!(forward, swapped);
            prop_assert!((0.0..=1.0).contains(&forward.eod_abs));
            prop_assert!((0.0..=1.0).contains(&forward.eod_sq));
        }
    }
}
