//! Repeated stratified train/test splits.
//!
//! Stratification is on the joint cells of the label and the selected
//! sensitive attributes, so every (label x group) combination keeps its
//! proportion in both halves of every split. Each repeat shuffles within
//! strata using an independent, seeded RNG stream, and partitions are
//! guaranteed pairwise distinct.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};

/// A column role to stratify on.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum StratifyColumn {
    /// The label column.
    Label,
    /// A sensitive attribute, by name.
    Sensitive(String),
}

/// Plan for repeated stratified splits.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SplitPlan {
    /// Fraction of each stratum placed in train, in (0, 1). Default 0.9.
    pub train_fraction: f64,
    /// Number of repeated splits. Default 10.
    pub repeats: usize,
    /// RNG seed; repeat r uses stream r of this seed.
    pub seed: u64,
    /// Columns to stratify on. An empty list means the default: the label
    /// plus every sensitive attribute of the dataset.
    #[serde(default)]
    pub stratify_on: Vec<StratifyColumn>,
}

impl SplitPlan {
    /// Plan with the default stratification (label x every sensitive
    /// attribute).
    pub fn new(train_fraction: f64, repeats: usize, seed: u64) -> Self {
        SplitPlan {
            train_fraction,
            repeats,
            seed,
            stratify_on: Vec::new(),
        }
    }
}

impl Default for SplitPlan {
    fn default() -> Self {
        SplitPlan::new(0.9, 10, 0)
    }
}

/// One train/test partition; both index lists are sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

fn describe_stratum(key: &[u8], columns: &[StratifyColumn]) -> String {
    columns
        .iter()
        .zip(key)
        .map(|(c, v)| match c {
            StratifyColumn::Label => format!("label={v}"),
            StratifyColumn::Sensitive(name) => format!("{name}={v}"),
        })
        .collect::<Vec<_>>()
        .join(", ")
}

/// Produce `plan.repeats` distinct stratified partitions of `dataset`.
///
/// Every stratum contributes `round(train_fraction * stratum_size)` rows to
/// train, clamped so both sides get at least one row — always within one row
/// of the exact proportion. Strata with fewer than two rows cannot place a
/// member on each side and are an error. Identical partitions are redrawn a
/// bounded number of times, then reported as an error.
pub fn make_splits(dataset: &Dataset, plan: &SplitPlan) -> Result<Vec<Split>> {
    if !(plan.train_fraction > 0.0 && plan.train_fraction < 1.0) {
        return Err(Error::config(format!(
            "train_fraction must be in (0, 1), got {}",
            plan.train_fraction
        )));
    }
    if plan.repeats < 1 {
        return Err(Error::config("repeats must be >= 1"));
    }
    let columns: Vec<StratifyColumn> = if plan.stratify_on.is_empty() {
        let mut cols = vec![StratifyColumn::Label];
        cols.extend(
            dataset
                .sensitive_names()
                .into_iter()
                .map(|n| StratifyColumn::Sensitive(n.to_string())),
        );
        cols
    } else {
        plan.stratify_on.clone()
    };

    // Resolve each stratify column to its values once, validating names.
    let mut column_values: Vec<&[u8]> = Vec::with_capacity(columns.len());
    for column in &columns {
        match column {
            StratifyColumn::Label => column_values.push(dataset.labels()),
            StratifyColumn::Sensitive(name) => column_values.push(dataset.sensitive(name)?),
        }
    }

    let mut strata: BTreeMap<Vec<u8>, Vec<usize>> = BTreeMap::new();
    for i in 0..dataset.n_rows() {
        let key: Vec<u8> = column_values.iter().map(|col| col[i]).collect();
        strata.entry(key).or_default().push(i);
    }
    for (key, rows) in &strata {
        if rows.len() < 2 {
            return Err(Error::data(format!(
                "stratum ({}) has {} row(s): too small to place at least one member in train and one in test",
                describe_stratum(key, &columns),
                rows.len()
            )));
        }
    }

    const MAX_REDRAWS: usize = 64;
    let mut splits: Vec<Split> = Vec::with_capacity(plan.repeats);
    for repeat in 0..plan.repeats {
        let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
        rng.set_stream(repeat as u64);
        let mut attempts = 0;
        let split = loop {
            let mut train = Vec::new();
            let mut test = Vec::new();
            for rows in strata.values() {
                let mut shuffled = rows.clone();
                shuffled.shuffle(&mut rng);
                let exact = plan.train_fraction * shuffled.len() as f64;
                let take = (exact.round() as usize).clamp(1, shuffled.len() - 1);
                train.extend_from_slice(&shuffled[..take]);
                test.extend_from_slice(&shuffled[take..]);
            }
            train.sort_unstable();
            test.sort_unstable();
            let candidate = Split { train, test };
            if !splits.contains(&candidate) {
                break candidate;
            }
            attempts += 1;
            if attempts > MAX_REDRAWS {
                return Err(Error::data(format!(
                    "could not draw {} distinct partitions (gave up at repeat {} after {} redraws); \
                     the dataset admits too few stratified partitions",
                    plan.repeats, repeat, MAX_REDRAWS
                )));
            }
        };
        splits.push(split);
    }
    Ok(splits)
}
