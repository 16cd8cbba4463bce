//! ROC curves and equal-risk ("closest to (0,1)") threshold selection.
//!
//! The decision rule is `score >= cutoff` throughout. A curve holds one
//! point per distinct score, in descending cutoff order, framed by the
//! sentinel endpoints (0,0) at cutoff +inf and (1,1) at cutoff -inf, so
//! cutoffs decrease strictly along the curve and both rates are
//! non-decreasing.

use crate::error::{Error, Result};

/// One operating point of a ROC curve.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Score cutoff realizing this point; the endpoints carry +-inf.
    pub cutoff: f64,
}

/// ROC curve over a score set.
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    /// Points in descending cutoff order, endpoints included.
    pub points: Vec<RocPoint>,
    pub n_positive: usize,
    pub n_negative: usize,
}

impl RocCurve {
    /// Area under the curve by the trapezoid rule.
    pub fn auc(&self) -> f64 {
        let mut area = 0.0;
        for pair in self.points.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            area += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2.0;
        }
        area
    }
}

/// Build the ROC curve for `scores` against binary `labels`.
pub fn roc(scores: &[f64], labels: &[u8]) -> Result<RocCurve> {
    if scores.len() != labels.len() {
        return Err(Error::data(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(pos) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::data(format!(
            "non-finite score {} at index {pos}",
            scores[pos]
        )));
    }
    if let Some(pos) = labels.iter().position(|&y| y > 1) {
        return Err(Error::data(format!(
            "label {} at index {pos} is not 0 or 1",
            labels[pos]
        )));
    }
    let n_positive = labels.iter().filter(|&&y| y == 1).count();
    let n_negative = labels.len() - n_positive;
    if n_positive == 0 || n_negative == 0 {
        return Err(Error::data("ROC needs both classes present in the labels"));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    // Descending by score; ties keep index order (irrelevant: tied scores
    // merge into a single point).
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("finite scores"));

    let mut points = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        cutoff: f64::INFINITY,
    }];
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut i = 0;
    while i < order.len() {
        let cutoff = scores[order[i]];
        // Consume the whole tie group before emitting a point.
        while i < order.len() && scores[order[i]] == cutoff {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            fpr: fp as f64 / n_negative as f64,
            tpr: tp as f64 / n_positive as f64,
            cutoff,
        });
    }
    points.push(RocPoint {
        fpr: 1.0,
        tpr: 1.0,
        cutoff: f64::NEG_INFINITY,
    });
    Ok(RocCurve {
        points,
        n_positive,
        n_negative,
    })
}

/// Select the cutoff whose point lies closest to the ideal corner (0, 1)
/// in Euclidean distance.
///
/// Ties go to the smaller false-positive rate, then to the larger cutoff.
/// Only points with finite cutoffs are candidates; a curve without any is
/// degenerate.
pub fn select_threshold_er(curve: &RocCurve) -> Result<f64> {
    let mut best: Option<(f64, f64, f64)> = None; // (distance^2, fpr, cutoff)
    for p in &curve.points {
        if !p.cutoff.is_finite() {
            continue;
        }
        let d2 = p.fpr * p.fpr + (1.0 - p.tpr) * (1.0 - p.tpr);
        let better = match best {
            None => true,
            Some((bd2, bfpr, bcut)) => {
                d2 < bd2 || (d2 == bd2 && (p.fpr < bfpr || (p.fpr == bfpr && p.cutoff > bcut)))
            }
        };
        if better {
            best = Some((d2, p.fpr, p.cutoff));
        }
    }
    best.map(|(_, _, cutoff)| cutoff)
        .ok_or_else(|| Error::data("degenerate ROC curve: no finite cutoff"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn four_point_curve_and_area() {
        let scores = [0.1, 0.4, 0.35, 0.8];
        let labels = [0, 0, 1, 1];
        let curve = roc(&scores, &labels).unwrap();
        let expect = [
            (0.0, 0.0, f64::INFINITY),
            (0.0, 0.5, 0.8),
            (0.5, 0.5, 0.4),
            (0.5, 1.0, 0.35),
            (1.0, 1.0, 0.1),
            (1.0, 1.0, f64::NEG_INFINITY),
        ];
        assert_eq!(curve.points.len(), expect.len());
        for (p, (fpr, tpr, cutoff)) in curve.points.iter().zip(expect) {
            assert_eq!((p.fpr, p.tpr, p.cutoff), (fpr, tpr, cutoff));
        }
        assert_abs_diff_eq!(curve.auc(), 0.75);
    }

    #[test]
    fn tied_scores_merge_into_one_point() {
        let scores = [0.5, 0.5, 0.5, 0.5];
        let labels = [1, 0, 1, 0];
        let curve = roc(&scores, &labels).unwrap();
        assert_eq!(curve.points.len(), 3);
        assert_eq!(
            curve.points[1],
            RocPoint {
                fpr: 1.0,
                tpr: 1.0,
                cutoff: 0.5
            }
        );
        assert_eq!(curve.points[2].cutoff, f64::NEG_INFINITY);
        assert_abs_diff_eq!(curve.auc(), 0.5);
    }

    #[test]
    fn rates_are_monotone_and_cutoffs_strictly_decreasing() {
        let scores = [0.9, 0.1, 0.5, 0.5, 0.3, 0.7, 0.2, 0.2];
        let labels = [1, 0, 1, 0, 1, 0, 0, 1];
        let curve = roc(&scores, &labels).unwrap();
        for pair in curve.points.windows(2) {
            assert!(pair[1].fpr >= pair[0].fpr);
            assert!(pair[1].tpr >= pair[0].tpr);
            assert!(pair[1].cutoff < pair[0].cutoff);
        }
        let last = curve.points[curve.points.len() - 2];
        assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        assert!(roc(&[0.2, 0.4], &[1, 1]).is_err());
        assert!(roc(&[0.2, 0.4], &[0, 0]).is_err());
        assert!(roc(&[0.2, f64::NAN], &[0, 1]).is_err());
        assert!(roc(&[0.2], &[0, 1]).is_err());
        assert!(roc(&[0.2, 0.4], &[0, 2]).is_err());
    }

    #[test]
    fn er_picks_the_point_closest_to_the_corner() {
        let curve = RocCurve {
            points: vec![
                RocPoint {
                    fpr: 0.0,
                    tpr: 0.0,
                    cutoff: f64::INFINITY,
                },
                RocPoint {
                    fpr: 0.2,
                    tpr: 0.9,
                    cutoff: 0.6,
                },
                RocPoint {
                    fpr: 1.0,
                    tpr: 1.0,
                    cutoff: 0.1,
                },
                RocPoint {
                    fpr: 1.0,
                    tpr: 1.0,
                    cutoff: f64::NEG_INFINITY,
                },
            ],
            n_positive: 10,
            n_negative: 10,
        };
        assert_eq!(select_threshold_er(&curve).unwrap(), 0.6);
    }

    #[test]
    fn er_ties_prefer_smaller_fpr_then_larger_cutoff() {
        // Two points at exactly equal distance from (0, 1) — quarters are
        // exactly representable, so the squared distances are bitwise equal:
        // (0.25, 0.5): 0.0625 + 0.25; (0.5, 0.75): 0.25 + 0.0625.
        let curve = RocCurve {
            points: vec![
                RocPoint {
                    fpr: 0.0,
                    tpr: 0.0,
                    cutoff: f64::INFINITY,
                },
                RocPoint {
                    fpr: 0.25,
                    tpr: 0.5,
                    cutoff: 0.8,
                },
                RocPoint {
                    fpr: 0.5,
                    tpr: 0.75,
                    cutoff: 0.5,
                },
                RocPoint {
                    fpr: 1.0,
                    tpr: 1.0,
                    cutoff: 0.1,
                },
                RocPoint {
                    fpr: 1.0,
                    tpr: 1.0,
                    cutoff: f64::NEG_INFINITY,
                },
            ],
            n_positive: 10,
            n_negative: 10,
        };
        assert_eq!(select_threshold_er(&curve).unwrap(), 0.8);

        // Identical points at different cutoffs: larger cutoff wins.
        let curve = RocCurve {
            points: vec![
                RocPoint {
                    fpr: 0.0,
                    tpr: 0.0,
                    cutoff: f64::INFINITY,
                },
                RocPoint {
                    fpr: 0.2,
                    tpr: 0.8,
                    cutoff: 0.9,
                },
                RocPoint {
                    fpr: 0.2,
                    tpr: 0.8,
                    cutoff: 0.4,
                },
                RocPoint {
                    fpr: 1.0,
                    tpr: 1.0,
                    cutoff: f64::NEG_INFINITY,
                },
            ],
            n_positive: 5,
            n_negative: 5,
        };
        assert_eq!(select_threshold_er(&curve).unwrap(), 0.9);
    }

    #[test]
    fn er_rejects_a_curve_with_no_finite_cutoff() {
        let curve = RocCurve {
            points: vec![
                RocPoint {
                    fpr: 0.0,
                    tpr: 0.0,
                    cutoff: f64::INFINITY,
                },
                RocPoint {
                    fpr: 1.0,
                    tpr: 1.0,
                    cutoff: f64::NEG_INFINITY,
                },
            ],
            n_positive: 1,
            n_negative: 1,
        };
        assert!(select_threshold_er(&curve).is_err());
    }

    #[test]
    fn perfect_separation_selects_the_corner_point() {
        let scores = [0.9, 0.8, 0.2, 0.1];
        let labels = [1, 1, 0, 0];
        let curve = roc(&scores, &labels).unwrap();
        assert_abs_diff_eq!(curve.auc(), 1.0);
        // The (0, 1) vertex is realized at cutoff 0.8 (lowest positive score).
        assert_eq!(select_threshold_er(&curve).unwrap(), 0.8);
    }
}
