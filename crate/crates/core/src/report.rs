//! Structured results of a pipeline run and their serialization to disk.
//!
//! One run produces a single [`RunReport`] holding the effective config,
//! the dataset profile, per-split results (evaluations, mitigation traces,
//! explanations), and cross-split aggregates. `write_files` lays it out
//! as:
//!
//! ```text
//! <out>/report.json                  everything, machine-readable
//! <out>/summary.txt                  the short human-readable version
//! <out>/importance_perf.csv          baseline-model importances
//! <out>/importance_fair_<attr>.csv   adjusted-model importances
//! <out>/rank_delta_<attr>.csv        rank movements, plot-ready
//! <out>/trace_<attr>.csv             mitigation descent, one row per epoch
//! ```
//!
//! Every artifact except the two explicitly volatile fields of
//! `report.json` (`generated_at_unix`, `wall_clock_seconds`) is a pure
//! function of the config, so repeated runs are byte-identical.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::metrics::{AggregateReport, EvalReport, MeanStd};
use crate::mitigation::{StopReason, TraceRecord};
use crate::shap::{AggregatedFeatureImportance, Explanation, RankDeltaReport};

/// Where the dataset came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataOrigin {
    Csv,
    Generated,
}

/// Profile of the dataset a run operated on.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DatasetSummary {
    pub origin: DataOrigin,
    pub n_rows: usize,
    pub n_features: usize,
    pub feature_names: Vec<String>,
    /// Fraction of rows with label 1.
    pub positive_rate: f64,
    /// Fraction of rows in group 1, per sensitive attribute.
    pub group1_fractions: BTreeMap<String, f64>,
}

/// Results of mitigating and explaining one attribute on one split.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FairSplitOutcome {
    /// Adjusted model on the test fold.
    pub evaluation: EvalReport,
    pub stop: StopReason,
    pub epochs: usize,
    pub reverted: bool,
    /// Infinity norm of (adjusted - starting) coefficients, intercept
    /// included.
    pub weight_drift_inf: f64,
    pub trace: Vec<TraceRecord>,
    pub explanation: Explanation,
}

/// Everything computed on one train/test split.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SplitReport {
    pub split_index: usize,
    pub n_train: usize,
    pub n_test: usize,
    /// Performance-optimal model on the test fold.
    pub performance: EvalReport,
    /// Keyed by mitigated attribute.
    pub attributes: BTreeMap<String, FairSplitOutcome>,
}

/// Cross-split summary for one mitigated attribute.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AttributeSummary {
    /// Adjusted-model evaluations aggregated across splits.
    pub fair: AggregateReport,
    /// Per-split `performance AUROC - adjusted AUROC`, aggregated.
    pub auroc_drop: MeanStd,
    /// Mitigation epochs across splits.
    pub epochs: MeanStd,
    /// Splits where mitigation kept the starting model.
    pub reverted_splits: usize,
    /// Importance of each feature under the starting model, aggregated.
    pub importance_perf: Vec<AggregatedFeatureImportance>,
    /// Importance of each feature under the adjusted model, aggregated.
    pub importance_fair: Vec<AggregatedFeatureImportance>,
    /// Rank movements between the two aggregated rankings.
    pub rank_deltas: RankDeltaReport,
    /// What changed, in words.
    pub information: String,
    /// How to read the numbers, in words.
    pub clarification: String,
}

/// The complete, serializable result of one pipeline run.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RunReport {
    /// Volatile: wall-clock time the report was generated.
    pub generated_at_unix: u64,
    /// Volatile: run duration.
    pub wall_clock_seconds: f64,
    /// Version of the library that produced the report.
    pub tool_version: String,
    /// The effective configuration, defaults included.
    pub config: PipelineConfig,
    pub dataset: DatasetSummary,
    pub splits: Vec<SplitReport>,
    /// Performance-model evaluations aggregated across splits.
    pub performance: AggregateReport,
    /// Per-attribute mitigation and explanation summaries.
    pub attributes: BTreeMap<String, AttributeSummary>,
}

fn fmt_mean_std(ms: &MeanStd) -> String {
    format!("{:.4} +/- {:.4} (n={})", ms.mean, ms.std, ms.n)
}

fn fmt_opt(ms: &Option<MeanStd>) -> String {
    match ms {
        Some(ms) => fmt_mean_std(ms),
        None => "undefined on every split".to_string(),
    }
}

impl RunReport {
    /// Assemble a report and generate the per-attribute explanation texts.
    #[allow(clippy::too_many_arguments)]
    pub fn assemble(
        config: PipelineConfig,
        dataset: DatasetSummary,
        splits: Vec<SplitReport>,
        performance: AggregateReport,
        mut attributes: BTreeMap<String, AttributeSummary>,
        generated_at_unix: u64,
        wall_clock_seconds: f64,
    ) -> RunReport {
        for (name, summary) in &mut attributes {
            summary.information = information_text(name, &performance, summary);
            summary.clarification = clarification_text(config.top_k);
        }
        RunReport {
            generated_at_unix,
            wall_clock_seconds,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            dataset,
            splits,
            performance,
            attributes,
        }
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut text =
            serde_json::to_string_pretty(self).expect("report serialization cannot fail");
        text.push('\n');
        text
    }

    /// Parse a report back from JSON.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::data(format!("malformed report: {e}")))
    }

    /// The short human-readable summary; contains no volatile fields.
    pub fn summary_text(&self) -> String {
        let mut out = String::new();
        let origin = match self.dataset.origin {
            DataOrigin::Csv => "csv",
            DataOrigin::Generated => "generated",
        };
        out.push_str("run summary\n===========\n");
        out.push_str(&format!(
            "data: {origin}, {} rows, {} features\n",
            self.dataset.n_rows, self.dataset.n_features
        ));
        out.push_str(&format!(
            "label positive rate: {:.4}\n",
            self.dataset.positive_rate
        ));
        out.push_str(&format!(
            "splits: {} repeats at {:.0}% train\n",
            self.config.split.repeats,
            self.config.split.train_fraction * 100.0
        ));
        out.push_str("\nperformance model across splits\n");
        out.push_str(&format!(
            "  auroc:       {}\n",
            fmt_mean_std(&self.performance.auroc)
        ));
        out.push_str(&format!(
            "  sensitivity: {}\n",
            fmt_mean_std(&self.performance.sensitivity)
        ));
        out.push_str(&format!(
            "  specificity: {}\n",
            fmt_mean_std(&self.performance.specificity)
        ));
        for (name, summary) in &self.attributes {
            out.push_str(&format!("\nattribute {name:?}\n"));
            let before = self
                .performance
                .attributes
                .get(name)
                .and_then(|a| a.eod_abs);
            let after = summary.fair.attributes.get(name).and_then(|a| a.eod_abs);
            out.push_str(&format!("  eod_abs before: {}\n", fmt_opt(&before)));
            out.push_str(&format!("  eod_abs after:  {}\n", fmt_opt(&after)));
            out.push_str(&format!(
                "  auroc drop:     {}\n",
                fmt_mean_std(&summary.auroc_drop)
            ));
            out.push_str(&format!(
                "  epochs:         {}\n",
                fmt_mean_std(&summary.epochs)
            ));
            if summary.reverted_splits > 0 {
                out.push_str(&format!(
                    "  reverted on {} of {} splits\n",
                    summary.reverted_splits, self.performance.n_splits
                ));
            }
            let movers: Vec<String> = summary
                .rank_deltas
                .deltas
                .iter()
                .filter(|d| summary.rank_deltas.most_changed.contains(&d.feature))
                .map(|d| format!("{} ({:+})", d.feature, d.delta))
                .collect();
            out.push_str(&format!(
                "  most-changed features: {}\n",
                if movers.is_empty() {
                    "none".to_string()
                } else {
                    movers.join(", ")
                }
            ));
            out.push_str(&format!("\n  {}\n", summary.information));
            out.push_str(&format!("\n  {}\n", summary.clarification));
        }
        out
    }

    /// Write all artifacts under `dir` (created if missing; existing files
    /// are overwritten). Returns the written paths.
    pub fn write_files(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();

        let report_path = dir.join("report.json");
        std::fs::write(&report_path, self.to_json())?;
        written.push(report_path);

        let summary_path = dir.join("summary.txt");
        std::fs::write(&summary_path, self.summary_text())?;
        written.push(summary_path);

        // The baseline model is shared across attributes, so its aggregated
        // importances must agree wherever they were computed; write them once.
        if let Some(first) = self.attributes.values().next() {
            for summary in self.attributes.values() {
                if summary.importance_perf != first.importance_perf {
                    return Err(Error::data(
                        "baseline importances disagree across attributes",
                    ));
                }
            }
            let perf_path = dir.join("importance_perf.csv");
            write_importance_csv(&perf_path, &first.importance_perf)?;
            written.push(perf_path);
        }

        for (name, summary) in &self.attributes {
            let fair_path = dir.join(format!("importance_fair_{name}.csv"));
            write_importance_csv(&fair_path, &summary.importance_fair)?;
            written.push(fair_path);

            let deltas_path = dir.join(format!("rank_delta_{name}.csv"));
            write_deltas_csv(&deltas_path, &summary.rank_deltas)?;
            written.push(deltas_path);

            let trace_path = dir.join(format!("trace_{name}.csv"));
            write_trace_csv(&trace_path, &self.splits, name)?;
            written.push(trace_path);
        }
        Ok(written)
    }
}

fn information_text(
    attribute: &str,
    performance: &AggregateReport,
    summary: &AttributeSummary,
) -> String {
    let before = performance
        .attributes
        .get(attribute)
        .and_then(|a| a.eod_abs);
    let after = summary
        .fair
        .attributes
        .get(attribute)
        .and_then(|a| a.eod_abs);
    let disparity = match (before, after) {
        (Some(b), Some(a)) => format!(
            "moved the mean test equalized-odds disparity (eod_abs) from {:.4} to {:.4}",
            b.mean, a.mean
        ),
        _ => "left the equalized-odds disparity undefined on some splits".to_string(),
    };
    let auroc = format!(
        "while mean AUROC went from {:.4} to {:.4}",
        performance.auroc.mean, summary.fair.auroc.mean
    );
    let movers: Vec<String> = summary
        .rank_deltas
        .deltas
        .iter()
        .filter(|d| summary.rank_deltas.most_changed.contains(&d.feature))
        .map(|d| format!("{} (rank {} -> {})", d.feature, d.rank_perf, d.rank_fair))
        .collect();
    let movement = if movers.is_empty() {
        "No feature changed its importance rank, so the adjustment rebalanced \
         weights without reordering what the model relies on."
            .to_string()
    } else {
        format!(
            "The features whose importance rank moved most: {}.",
            movers.join(", ")
        )
    };
    format!("Fine-tuning for {attribute:?} {disparity}, {auroc}. {movement}")
}

fn clarification_text(top_k: usize) -> String {
    format!(
        "Importance ranks come from mean absolute Shapley attributions of the \
         test rows against the mean training instance (rank 1 = most \
         important), averaged across splits and re-ranked. delta = rank \
         before minus rank after, so positive delta means the feature gained \
         importance through mitigation. The most-changed set lists at most \
         top_k = {top_k} features with |delta| >= 1."
    )
}

fn write_importance_csv(path: &Path, rows: &[AggregatedFeatureImportance]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(csv_err)?;
    writer
        .write_record(["feature", "rank", "mean_rank", "mean_score"])
        .map_err(csv_err)?;
    for row in rows {
        writer
            .write_record([
                row.feature.clone(),
                row.rank.to_string(),
                row.mean_rank.to_string(),
                row.mean_score.to_string(),
            ])
            .map_err(csv_err)?;
    }
    writer.flush()?;
    Ok(())
}

fn write_deltas_csv(path: &Path, deltas: &RankDeltaReport) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(csv_err)?;
    writer
        .write_record(["feature", "rank_perf", "rank_fair", "delta", "most_changed"])
        .map_err(csv_err)?;
    for d in &deltas.deltas {
        writer
            .write_record([
                d.feature.clone(),
                d.rank_perf.to_string(),
                d.rank_fair.to_string(),
                d.delta.to_string(),
                deltas.most_changed.contains(&d.feature).to_string(),
            ])
            .map_err(csv_err)?;
    }
    writer.flush()?;
    Ok(())
}

fn write_trace_csv(path: &Path, splits: &[SplitReport], attribute: &str) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(csv_err)?;
    writer
        .write_record([
            "split",
            "epoch",
            "eod_loss",
            "tpr_gap",
            "fpr_gap",
            "ce_loss",
            "holdout_auroc",
            "total_loss",
        ])
        .map_err(csv_err)?;
    for split in splits {
        let outcome = split.attributes.get(attribute).ok_or_else(|| {
            Error::data(format!(
                "split {} has no outcome for attribute {attribute:?}",
                split.split_index
            ))
        })?;
        for r in &outcome.trace {
            let mut row = vec![split.split_index.to_string()];
            row.extend(trace_fields(r));
            writer.write_record(&row).map_err(csv_err)?;
        }
    }
    writer.flush()?;
    Ok(())
}

/// Write one mitigation trace as CSV: a header plus one row per accepted
/// epoch. The pipeline's per-attribute trace artifact is the same shape
/// with a leading `split` column; this form backs single-run tooling.
pub fn write_trace_records(path: &Path, records: &[TraceRecord]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(csv_err)?;
    writer
        .write_record([
            "epoch",
            "eod_loss",
            "tpr_gap",
            "fpr_gap",
            "ce_loss",
            "holdout_auroc",
            "total_loss",
        ])
        .map_err(csv_err)?;
    for r in records {
        writer.write_record(trace_fields(r)).map_err(csv_err)?;
    }
    writer.flush()?;
    Ok(())
}

fn trace_fields(r: &TraceRecord) -> [String; 7] {
    [
        r.epoch.to_string(),
        r.eod_loss.to_string(),
        r.tpr_gap.to_string(),
        r.fpr_gap.to_string(),
        r.ce_loss.to_string(),
        r.holdout_auroc.map(|v| v.to_string()).unwrap_or_default(),
        r.total_loss.to_string(),
    ]
}

fn csv_err(err: csv::Error) -> Error {
    Error::data(format!("csv write failed: {err}"))
}
