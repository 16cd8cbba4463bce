//! End-to-end orchestration: data, repeated splits, training, mitigation,
//! explanation, aggregation, and artifact writing.
//!
//! Per split: train the performance model, evaluate it, then per sensitive
//! attribute fine-tune for fairness, evaluate the adjusted model, and
//! explain the adjustment through attribution-rank movements. Splits are
//! independent and run in parallel; results are assembled in split order,
//! so the report does not depend on scheduling.
//!
//! All computation happens before anything is written. A failure while
//! computing therefore leaves no artifacts; a failure while writing (disk
//! full, permissions) can leave a partial output directory.
//!
//! Written artifacts: the report files (see [`crate::report`]) plus every
//! trained model under `models/`, as `split_<k>_perf.toml` and
//! `split_<k>_fair_<attribute>.toml`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;

use crate::config::PipelineConfig;
use crate::data::{generate, load_csv, make_splits, Dataset, Split, SplitPlan};
use crate::error::{Error, Result};
use crate::metrics::{aggregate, evaluate_with_privileged, EvalReport, MeanStd};
use crate::mitigation::mitigate;
use crate::model::{train_performance, LogitModel};
use crate::report::{
    AttributeSummary, DataOrigin, DatasetSummary, FairSplitOutcome, RunReport, SplitReport,
};
use crate::shap::{aggregate_rankings, compare_rank_maps, run_algorithm_1, ImportanceRanking};

/// A finished run: the report and every path written under the output
/// directory.
#[derive(Debug)]
pub struct PipelineOutcome {
    pub report: RunReport,
    pub written: Vec<PathBuf>,
}

/// Models fitted on one split: the performance model and one adjusted
/// model per attribute.
struct SplitModels {
    perf: LogitModel,
    fair: BTreeMap<String, LogitModel>,
}

/// Run the whole pipeline described by `config`, writing artifacts under
/// `out_dir` (created if missing, files overwritten).
pub fn run_pipeline(config: &PipelineConfig, out_dir: &Path) -> Result<PipelineOutcome> {
    let started = Instant::now();
    config.validate()?;
    let (dataset, origin) = load_dataset(config)?;
    let attributes = resolve_attributes(config, &dataset)?;

    let plan = SplitPlan {
        train_fraction: config.split.train_fraction,
        repeats: config.split.repeats,
        seed: config.split_seed(),
        stratify_on: Vec::new(), // label plus every sensitive attribute
    };
    let splits = make_splits(&dataset, &plan)?;
    log::info!(
        "processing {} splits of {} rows for attributes {:?}",
        splits.len(),
        dataset.n_rows(),
        attributes
    );

    let results: Result<Vec<(SplitReport, SplitModels)>> = splits
        .par_iter()
        .enumerate()
        .map(|(index, split)| process_split(index, split, &dataset, config, &attributes))
        .collect();
    let (split_reports, split_models): (Vec<SplitReport>, Vec<SplitModels>) =
        results?.into_iter().unzip();

    let perf_reports: Vec<EvalReport> = split_reports
        .iter()
        .map(|s| s.performance.clone())
        .collect();
    let performance = aggregate(&perf_reports)?;

    let mut summaries = BTreeMap::new();
    for attribute in &attributes {
        summaries.insert(
            attribute.clone(),
            summarize_attribute(attribute, &split_reports, config.top_k)?,
        );
    }

    let report = RunReport::assemble(
        config.clone(),
        summarize_dataset(&dataset, origin),
        split_reports,
        performance,
        summaries,
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .unwrap_or_default()
            .as_secs(),
        started.elapsed().as_secs_f64(),
    );

    let mut written = report.write_files(out_dir)?;
    let models_dir = out_dir.join("models");
    std::fs::create_dir_all(&models_dir)?;
    for (index, models) in split_models.iter().enumerate() {
        let perf_path = models_dir.join(format!("split_{index:02}_perf.toml"));
        models.perf.save(&perf_path)?;
        written.push(perf_path);
        for (attribute, model) in &models.fair {
            let fair_path = models_dir.join(format!("split_{index:02}_fair_{attribute}.toml"));
            model.save(&fair_path)?;
            written.push(fair_path);
        }
    }
    Ok(PipelineOutcome { report, written })
}

fn load_dataset(config: &PipelineConfig) -> Result<(Dataset, DataOrigin)> {
    match (&config.data.csv, &config.data.generate) {
        (Some(csv), None) => Ok((
            load_csv(&csv.path, &csv.label_column, &csv.sensitive_columns)?,
            DataOrigin::Csv,
        )),
        (None, Some(generator)) => Ok((generate(generator)?, DataOrigin::Generated)),
        // validate() has already rejected the other combinations
        _ => Err(Error::config("exactly one data source is required")),
    }
}

fn resolve_attributes(config: &PipelineConfig, dataset: &Dataset) -> Result<Vec<String>> {
    let available = dataset.sensitive_names();
    match &config.attributes {
        Some(requested) => {
            for name in requested {
                if !available.contains(&name.as_str()) {
                    return Err(Error::config(format!(
                        "attribute {name:?} is not a sensitive column of the data \
                         (available: {available:?})"
                    )));
                }
            }
            Ok(requested.clone())
        }
        None => {
            if available.is_empty() {
                return Err(Error::config(
                    "the dataset has no sensitive attributes to mitigate",
                ));
            }
            Ok(available.into_iter().map(String::from).collect())
        }
    }
}

fn summarize_dataset(dataset: &Dataset, origin: DataOrigin) -> DatasetSummary {
    let n = dataset.n_rows() as f64;
    let positive_rate = dataset.labels().iter().filter(|&&y| y == 1).count() as f64 / n;
    let group1_fractions = dataset
        .sensitive_columns()
        .iter()
        .map(|(name, values)| {
            let fraction = values.iter().filter(|&&z| z == 1).count() as f64 / n;
            (name.clone(), fraction)
        })
        .collect();
    DatasetSummary {
        origin,
        n_rows: dataset.n_rows(),
        n_features: dataset.n_features(),
        feature_names: dataset.feature_names().to_vec(),
        positive_rate,
        group1_fractions,
    }
}

fn process_split(
    index: usize,
    split: &Split,
    dataset: &Dataset,
    config: &PipelineConfig,
    attributes: &[String],
) -> Result<(SplitReport, SplitModels)> {
    let context = |phase: &str| format!("split {index}, {phase}");
    let train = dataset.subset(&split.train)?;
    let test = dataset.subset(&split.test)?;
    let perf = train_performance(&train, &config.train)
        .map_err(|e| e.with_context(&context("training")))?;
    let performance = evaluate_with_privileged(&perf, &test, &config.privileged)
        .map_err(|e| e.with_context(&context("evaluation")))?;

    let mut outcomes = BTreeMap::new();
    let mut fair_models = BTreeMap::new();
    for attribute in attributes {
        let mit_config = config
            .mitigation
            .to_config(attribute, config.mitigation_seed());
        let (fair, trace) = mitigate(&perf, &train, &mit_config)
            .map_err(|e| e.with_context(&context(&format!("mitigation for {attribute:?}"))))?;
        let evaluation = evaluate_with_privileged(&fair, &test, &config.privileged)
            .map_err(|e| e.with_context(&context(&format!("evaluation for {attribute:?}"))))?;
        let weight_drift_inf = fair
            .weights
            .iter()
            .zip(&perf.weights)
            .map(|(a, b)| (a - b).abs())
            .fold((fair.intercept - perf.intercept).abs(), f64::max);
        let explanation = run_algorithm_1(&perf, &fair, &train, &test, config.top_k)
            .map_err(|e| e.with_context(&context(&format!("explanation for {attribute:?}"))))?;
        outcomes.insert(
            attribute.clone(),
            FairSplitOutcome {
                evaluation,
                stop: trace.stop,
                epochs: trace.epochs,
                reverted: trace.reverted,
                weight_drift_inf,
                trace: trace.records,
                explanation,
            },
        );
        fair_models.insert(attribute.clone(), fair);
    }
    Ok((
        SplitReport {
            split_index: index,
            n_train: split.train.len(),
            n_test: split.test.len(),
            performance,
            attributes: outcomes,
        },
        SplitModels {
            perf,
            fair: fair_models,
        },
    ))
}

fn summarize_attribute(
    attribute: &str,
    splits: &[SplitReport],
    top_k: usize,
) -> Result<AttributeSummary> {
    let outcomes: Vec<&FairSplitOutcome> = splits
        .iter()
        .map(|s| {
            s.attributes.get(attribute).ok_or_else(|| {
                Error::data(format!(
                    "split {} is missing results for attribute {attribute:?}",
                    s.split_index
                ))
            })
        })
        .collect::<Result<_>>()?;

    let fair_evals: Vec<EvalReport> = outcomes.iter().map(|o| o.evaluation.clone()).collect();
    let fair = aggregate(&fair_evals)?;

    let drops: Vec<f64> = splits
        .iter()
        .zip(&outcomes)
        .map(|(s, o)| s.performance.auroc - o.evaluation.auroc)
        .collect();
    let auroc_drop = MeanStd::from_values(&drops).expect("at least one split");

    let epoch_counts: Vec<f64> = outcomes.iter().map(|o| o.epochs as f64).collect();
    let epochs = MeanStd::from_values(&epoch_counts).expect("at least one split");
    let reverted_splits = outcomes.iter().filter(|o| o.reverted).count();

    let perf_rankings: Vec<ImportanceRanking> = outcomes
        .iter()
        .map(|o| o.explanation.ranking_perf.clone())
        .collect();
    let fair_rankings: Vec<ImportanceRanking> = outcomes
        .iter()
        .map(|o| o.explanation.ranking_fair.clone())
        .collect();
    let importance_perf = aggregate_rankings(&perf_rankings)?;
    let importance_fair = aggregate_rankings(&fair_rankings)?;
    let rank_map = |importances: &[crate::shap::AggregatedFeatureImportance]| {
        importances
            .iter()
            .map(|f| (f.feature.clone(), f.rank))
            .collect::<BTreeMap<String, usize>>()
    };
    let rank_deltas = compare_rank_maps(
        &rank_map(&importance_perf),
        &rank_map(&importance_fair),
        top_k,
    )?;

    Ok(AttributeSummary {
        fair,
        auroc_drop,
        epochs,
        reverted_splits,
        importance_perf,
        importance_fair,
        rank_deltas,
        information: String::new(),
        clarification: String::new(),
    })
}
