//! Feature-importance rankings from attribution matrices, and the
//! rank-movement comparison that explains what a fairness fine-tune
//! changed.
//!
//! The comparison runs: attribute both models over the same instances
//! against the same background, aggregate each feature's attributions to a
//! scalar importance, rank features (1 = most important), and report the
//! per-feature rank movement `delta = rank_before - rank_after`. Positive
//! delta means the feature *gained* importance in the adjusted model. The
//! `most_changed` set collects the `top_k` features with the largest
//! absolute movement, ignoring features that did not move at all.

use std::collections::BTreeMap;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::LogitModel;
use crate::shap::{shapley_linear, AttributionMatrix, AttributionScale};

/// How per-instance attributions collapse into one importance per feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Mean absolute attribution: magnitude of influence. The default.
    MeanAbs,
    /// Mean signed attribution: direction of influence, for diagnostics.
    MeanSigned,
}

/// One feature's aggregated importance and rank.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RankedFeature {
    pub feature: String,
    pub score: f64,
    /// 1 = most important.
    pub rank: usize,
}

/// All features ranked by aggregated importance.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ImportanceRanking {
    /// Sorted by rank: highest score first; exact score ties break by
    /// feature name.
    pub entries: Vec<RankedFeature>,
    pub aggregation: Aggregation,
    /// True when two features' scores tied exactly, making their relative
    /// order an artifact of the name tie-break.
    pub degenerate: bool,
}

impl ImportanceRanking {
    /// Map from feature name to rank.
    pub fn ranks(&self) -> BTreeMap<String, usize> {
        self.entries
            .iter()
            .map(|e| (e.feature.clone(), e.rank))
            .collect()
    }
}

/// Rank features by aggregated attribution, descending.
pub fn rank_features(
    attributions: &AttributionMatrix,
    aggregation: Aggregation,
) -> ImportanceRanking {
    let n = attributions.values.nrows() as f64;
    let mut entries: Vec<RankedFeature> = attributions
        .feature_names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let column = attributions.values.column(j);
            let score = match aggregation {
                Aggregation::MeanAbs => column.iter().map(|v| v.abs()).sum::<f64>() / n,
                Aggregation::MeanSigned => column.sum() / n,
            };
            RankedFeature {
                feature: name.clone(),
                score,
                rank: 0,
            }
        })
        .collect();
    entries.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.feature.cmp(&b.feature)));
    let degenerate = entries.windows(2).any(|w| w[0].score == w[1].score);
    for (i, entry) in entries.iter_mut().enumerate() {
        entry.rank = i + 1;
    }
    ImportanceRanking {
        entries,
        aggregation,
        degenerate,
    }
}

/// One feature's rank movement between two rankings.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RankDelta {
    pub feature: String,
    pub rank_perf: usize,
    pub rank_fair: usize,
    /// `rank_perf - rank_fair`; positive = gained importance after the
    /// fine-tune.
    pub delta: i64,
}

/// Rank movements of every feature, plus the most-changed subset.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RankDeltaReport {
    /// Sorted by absolute movement (largest first), ties by feature name.
    pub deltas: Vec<RankDelta>,
    /// Up to `top_k` feature names with `|delta| >= 1`, in `deltas` order.
    pub most_changed: Vec<String>,
    pub top_k: usize,
}

/// Rank movements from explicit rank maps (for example, cross-split mean
/// ranks after re-ranking). Both maps must rank the same features.
pub fn compare_rank_maps(
    perf: &BTreeMap<String, usize>,
    fair: &BTreeMap<String, usize>,
    top_k: usize,
) -> Result<RankDeltaReport> {
    if perf.len() != fair.len() || perf.keys().ne(fair.keys()) {
        return Err(Error::data(
            "cannot compare rankings over different feature sets",
        ));
    }
    let mut deltas: Vec<RankDelta> = perf
        .iter()
        .map(|(feature, &rank_perf)| {
            let rank_fair = fair[feature];
            RankDelta {
                feature: feature.clone(),
                rank_perf,
                rank_fair,
                delta: rank_perf as i64 - rank_fair as i64,
            }
        })
        .collect();
    deltas.sort_by(|a, b| {
        b.delta
            .abs()
            .cmp(&a.delta.abs())
            .then_with(|| a.feature.cmp(&b.feature))
    });
    let most_changed = deltas
        .iter()
        .filter(|d| d.delta != 0)
        .take(top_k)
        .map(|d| d.feature.clone())
        .collect();
    Ok(RankDeltaReport {
        deltas,
        most_changed,
        top_k,
    })
}

/// Rank movements between two importance rankings.
pub fn compare_rankings(
    perf: &ImportanceRanking,
    fair: &ImportanceRanking,
    top_k: usize,
) -> Result<RankDeltaReport> {
    compare_rank_maps(&perf.ranks(), &fair.ranks(), top_k)
}

/// The explanation for one train/test split: both models' importance
/// rankings over the test instances and the rank movements between them.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Explanation {
    pub ranking_perf: ImportanceRanking,
    pub ranking_fair: ImportanceRanking,
    pub deltas: RankDeltaReport,
}

/// Explain what a fairness fine-tune changed: attribute both models over
/// the test instances (background = mean training instance, logit scale,
/// mean-absolute aggregation), rank, and compare.
pub fn run_algorithm_1(
    model_perf: &LogitModel,
    model_fair: &LogitModel,
    train: &Dataset,
    test: &Dataset,
    top_k: usize,
) -> Result<Explanation> {
    if top_k < 1 {
        return Err(Error::config("top_k must be at least 1"));
    }
    if model_perf.feature_names != model_fair.feature_names {
        return Err(Error::data(
            "the two models do not score the same feature set",
        ));
    }
    model_perf.ensure_matches(train)?;
    model_perf.ensure_matches(test)?;
    let background = train.feature_means();
    let scale = AttributionScale::Logit;
    let attr_perf = shapley_linear(model_perf, &background, test.features(), scale)?;
    let attr_fair = shapley_linear(model_fair, &background, test.features(), scale)?;
    let ranking_perf = rank_features(&attr_perf, Aggregation::MeanAbs);
    let ranking_fair = rank_features(&attr_fair, Aggregation::MeanAbs);
    let deltas = compare_rankings(&ranking_perf, &ranking_fair, top_k)?;
    Ok(Explanation {
        ranking_perf,
        ranking_fair,
        deltas,
    })
}

/// One feature's importance aggregated across splits.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AggregatedFeatureImportance {
    pub feature: String,
    /// Mean of the feature's per-split ranks.
    pub mean_rank: f64,
    /// Mean of the feature's per-split scores.
    pub mean_score: f64,
    /// Rank after re-ranking by mean rank (ties by name); 1 = most
    /// important.
    pub rank: usize,
}

/// Aggregate per-split rankings: average each feature's rank, then re-rank
/// by that average. All rankings must cover the same features with the
/// same aggregation.
pub fn aggregate_rankings(
    rankings: &[ImportanceRanking],
) -> Result<Vec<AggregatedFeatureImportance>> {
    let Some(first) = rankings.first() else {
        return Err(Error::data("cannot aggregate zero rankings"));
    };
    let reference = first.ranks();
    let mut sums: BTreeMap<&str, (f64, f64)> = BTreeMap::new();
    for ranking in rankings {
        if ranking.aggregation != first.aggregation {
            return Err(Error::data(
                "cannot aggregate rankings built with different aggregations",
            ));
        }
        if ranking.entries.len() != reference.len()
            || ranking
                .entries
                .iter()
                .any(|e| !reference.contains_key(&e.feature))
        {
            return Err(Error::data(
                "cannot aggregate rankings over different feature sets",
            ));
        }
        for entry in &ranking.entries {
            let slot = sums.entry(entry.feature.as_str()).or_insert((0.0, 0.0));
            slot.0 += entry.rank as f64;
            slot.1 += entry.score;
        }
    }
    let n = rankings.len() as f64;
    let mut aggregated: Vec<AggregatedFeatureImportance> = sums
        .into_iter()
        .map(
            |(feature, (rank_sum, score_sum))| AggregatedFeatureImportance {
                feature: feature.to_string(),
                mean_rank: rank_sum / n,
                mean_score: score_sum / n,
                rank: 0,
            },
        )
        .collect();
    aggregated.sort_by(|a, b| {
        a.mean_rank
            .total_cmp(&b.mean_rank)
            .then_with(|| a.feature.cmp(&b.feature))
    });
    for (i, feature) in aggregated.iter_mut().enumerate() {
        feature.rank = i + 1;
    }
    Ok(aggregated)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    fn matrix(names: &[&str], rows: Array2<f64>) -> AttributionMatrix {
        AttributionMatrix {
            values: rows,
            base_value: 0.0,
            scale: AttributionScale::Logit,
            background: vec![0.0; names.len()],
            feature_names: names.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn ranking_of(names: &[&str], scores: &[f64]) -> ImportanceRanking {
        let rows = Array2::from_shape_vec((1, scores.len()), scores.to_vec()).unwrap();
        rank_features(&matrix(names, rows), Aggregation::MeanAbs)
    }

    #[test]
    fn ranks_follow_scores_with_name_tie_break() {
        let attr = matrix(&["a", "b", "c"], array![[1.0, -3.0, 1.0]]);
        let ranking = rank_features(&attr, Aggregation::MeanAbs);
        let order: Vec<(&str, usize)> = ranking
            .entries
            .iter()
            .map(|e| (e.feature.as_str(), e.rank))
            .collect();
        // |b| = 3 leads; a and c tie at 1 and fall back to name order.
        assert_eq!(order, vec![("b", 1), ("a", 2), ("c", 3)]);
        assert!(ranking.degenerate);
    }

    #[test]
    fn signed_aggregation_keeps_direction() {
        let attr = matrix(&["a", "b"], array![[1.0, -3.0], [1.0, -3.0]]);
        let ranking = rank_features(&attr, Aggregation::MeanSigned);
        assert_eq!(ranking.entries[0].feature, "a");
        assert_eq!(ranking.entries[0].score, 1.0);
        assert_eq!(ranking.entries[1].score, -3.0);
        assert!(!ranking.degenerate);
    }

    #[test]
    fn deltas_on_a_worked_example() {
        // Before: a=1, b=2, c=3. After: c=1, a=2, b=3.
        let perf = ranking_of(&["a", "b", "c"], &[3.0, 2.0, 1.0]);
        let fair = ranking_of(&["a", "b", "c"], &[2.0, 1.0, 3.0]);
        let report = compare_rankings(&perf, &fair, 2).unwrap();
        let by_name: BTreeMap<&str, i64> = report
            .deltas
            .iter()
            .map(|d| (d.feature.as_str(), d.delta))
            .collect();
        assert_eq!(by_name["a"], -1);
        assert_eq!(by_name["b"], -1);
        assert_eq!(by_name["c"], 2);
        // Movements sum to zero: both rankings are permutations of 1..=m.
        assert_eq!(report.deltas.iter().map(|d| d.delta).sum::<i64>(), 0);
        // c moved most; the second slot goes to a by the name tie-break.
        assert_eq!(report.most_changed, vec!["c", "a"]);
    }

    #[test]
    fn unmoved_features_stay_out_of_most_changed() {
        let perf = ranking_of(&["a", "b"], &[2.0, 1.0]);
        let report = compare_rankings(&perf, &perf, 5).unwrap();
        assert!(report.most_changed.is_empty());
        assert!(report.deltas.iter().all(|d| d.delta == 0));
    }

    #[test]
    fn mismatched_feature_sets_are_rejected() {
        let a = ranking_of(&["a", "b"], &[2.0, 1.0]);
        let b = ranking_of(&["a", "x"], &[2.0, 1.0]);
        assert!(compare_rankings(&a, &b, 1).is_err());
    }

    #[test]
    fn column_permutation_does_not_change_ranks() {
        let attr1 = matrix(&["a", "b", "c"], array![[0.5, 2.0, -1.0]]);
        let attr2 = matrix(&["c", "a", "b"], array![[-1.0, 0.5, 2.0]]);
        let r1 = rank_features(&attr1, Aggregation::MeanAbs);
        let r2 = rank_features(&attr2, Aggregation::MeanAbs);
        assert_eq!(r1.ranks(), r2.ranks());
    }

    #[test]
    fn aggregation_means_ranks_then_re_ranks() {
        // Feature ranks across two splits: a: (1, 3) -> 2.0; b: (2, 1)
        // -> 1.5; c: (3, 2) -> 2.5. Re-ranked: b, a, c.
        let s1 = ranking_of(&["a", "b", "c"], &[3.0, 2.0, 1.0]);
        let s2 = ranking_of(&["a", "b", "c"], &[1.0, 3.0, 2.0]);
        let agg = aggregate_rankings(&[s1, s2]).unwrap();
        let order: Vec<(&str, usize, f64)> = agg
            .iter()
            .map(|f| (f.feature.as_str(), f.rank, f.mean_rank))
            .collect();
        // Output is sorted by mean rank.
        assert_eq!(order, vec![("b", 1, 1.5), ("a", 2, 2.0), ("c", 3, 2.5)]);
        assert!(aggregate_rankings(&[]).is_err());
    }

    #[test]
    fn identical_models_produce_all_zero_deltas() {
        use crate::data::{generate, GeneratorConfig, SensitiveSpec};
        use crate::model::{train_performance, TrainConfig};
        let data = generate(&GeneratorConfig {
            n: 300,
            m_informative: 3,
            m_noise: 2,
            sensitive: vec![SensitiveSpec {
                name: "grp".into(),
                group_fraction: 0.5,
            }],
            positive_rate: 0.4,
            disparity_strength: 0.8,
            seed: 21,
        })
        .unwrap();
        let model = train_performance(&data, &TrainConfig::default()).unwrap();
        let explanation = run_algorithm_1(&model, &model, &data, &data, 10).unwrap();
        assert!(explanation.deltas.deltas.iter().all(|d| d.delta == 0));
        assert!(explanation.deltas.most_changed.is_empty());
        assert_eq!(explanation.ranking_perf, explanation.ranking_fair);
    }
}
