//! Declarative configuration for the end-to-end pipeline, read from TOML.
//!
//! A config names exactly one data source (a CSV file or the synthetic
//! generator), the split plan, the training and mitigation settings, and
//! the explanation size. One top-level `seed` makes a run reproducible:
//! the split plan uses `seed + 1` and mitigation's monitor carve uses
//! `seed + 2`, while a generated data source carries its own seed so the
//! dataset is pinned independently of pipeline-level randomness.
//!
//! Unknown keys anywhere in the file are errors, so typos fail loudly
//! instead of silently falling back to defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::data::GeneratorConfig;
use crate::error::{Error, Result};
use crate::mitigation::{MitigationConfig, RateMode};
use crate::model::TrainConfig;

/// A CSV data source.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSource {
    /// Path to the file, resolved against the working directory.
    pub path: PathBuf,
    /// Column holding the binary label. Default `label`.
    #[serde(default = "default_label_column")]
    pub label_column: String,
    /// Columns holding binary sensitive attributes.
    pub sensitive_columns: Vec<String>,
}

fn default_label_column() -> String {
    "label".to_string()
}

/// Exactly one data source.
#[derive(Debug, Clone, PartialEq, Default, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<CsvSource>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generate: Option<GeneratorConfig>,
}

/// Split plan: how many train/test partitions and at what proportion.
/// Stratification is always on the label and every sensitive attribute.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitSection {
    /// Fraction of each stratum placed in train, in (0, 1).
    pub train_fraction: f64,
    /// Number of distinct partitions.
    pub repeats: usize,
}

impl Default for SplitSection {
    fn default() -> Self {
        SplitSection {
            train_fraction: 0.9,
            repeats: 10,
        }
    }
}

/// Mitigation settings shared by every attribute the pipeline processes.
/// The attribute name and carve seed are filled in per run by the
/// pipeline, so they are not part of the file format.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MitigationSection {
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub rate_mode: RateMode,
    pub ce_anchor_weight: f64,
    pub early_stop_auroc_drop: f64,
}

impl Default for MitigationSection {
    fn default() -> Self {
        let base = MitigationConfig::default();
        MitigationSection {
            learning_rate: base.learning_rate,
            max_epochs: base.max_epochs,
            rate_mode: base.rate_mode,
            ce_anchor_weight: base.ce_anchor_weight,
            early_stop_auroc_drop: base.early_stop_auroc_drop,
        }
    }
}

impl MitigationSection {
    /// Materialize the full mitigation config for one attribute.
    pub fn to_config(&self, attribute: &str, seed: u64) -> MitigationConfig {
        MitigationConfig {
            attribute: attribute.to_string(),
            learning_rate: self.learning_rate,
            max_epochs: self.max_epochs,
            rate_mode: self.rate_mode,
            ce_anchor_weight: self.ce_anchor_weight,
            early_stop_auroc_drop: self.early_stop_auroc_drop,
            seed,
        }
    }
}

/// Everything one pipeline run needs.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Root seed; splits use `seed + 1`, mitigation carves use `seed + 2`.
    #[serde(default)]
    pub seed: u64,
    /// Size cap of the most-changed feature set in explanations.
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    /// Sensitive attributes to mitigate and explain; default all.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attributes: Option<Vec<String>>,
    pub data: DataSection,
    #[serde(default)]
    pub split: SplitSection,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub mitigation: MitigationSection,
    /// Per-attribute privileged group (0 or 1) for signed gap reporting;
    /// attributes not listed default to the more populous group.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub privileged: BTreeMap<String, u8>,
}

fn default_top_k() -> usize {
    20
}

impl PipelineConfig {
    /// Parse and validate a config from TOML text.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: PipelineConfig =
            toml::from_str(text).map_err(|e| Error::config(format!("bad config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    /// Read, parse, and validate a config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config `{}`: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Serialize back to TOML (used to echo the effective config).
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialization cannot fail")
    }

    pub fn split_seed(&self) -> u64 {
        self.seed.wrapping_add(1)
    }

    pub fn mitigation_seed(&self) -> u64 {
        self.seed.wrapping_add(2)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        match (&self.data.csv, &self.data.generate) {
            (Some(_), Some(_)) => {
                return Err(Error::config(
                    "choose one data source: [data.csv] or [data.generate], not both",
                ))
            }
            (None, None) => {
                return Err(Error::config(
                    "a data source is required: add [data.csv] or [data.generate]",
                ))
            }
            _ => {}
        }
        if let Some(csv) = &self.data.csv {
            if csv.sensitive_columns.is_empty() {
                return Err(Error::config(
                    "data.csv.sensitive_columns must name at least one column",
                ));
            }
        }
        if self.top_k < 1 {
            return Err(Error::config("top_k must be at least 1"));
        }
        if let Some(attributes) = &self.attributes {
            if attributes.is_empty() {
                return Err(Error::config(
                    "attributes, when given, must name at least one sensitive attribute",
                ));
            }
            let mut seen = std::collections::BTreeSet::new();
            for name in attributes {
                if name.is_empty() {
                    return Err(Error::config("attributes entries must be non-empty"));
                }
                if !seen.insert(name) {
                    return Err(Error::config(format!("attribute {name:?} is listed twice")));
                }
            }
        }
        if !(self.split.train_fraction > 0.0 && self.split.train_fraction < 1.0) {
            return Err(Error::config(format!(
                "split.train_fraction must be in (0, 1), got {}",
                self.split.train_fraction
            )));
        }
        if self.split.repeats < 1 {
            return Err(Error::config("split.repeats must be >= 1"));
        }
        for (name, &group) in &self.privileged {
            if group > 1 {
                return Err(Error::config(format!(
                    "privileged group for {name:?} must be 0 or 1, got {group}"
                )));
            }
        }
        self.train.validate()?;
        // Borrow the full validation, including the hard-mode rejection.
        self.mitigation.to_config("attribute", 0).validate()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[data.generate]
n = 200
m_informative = 2
sensitive = [{ name = "grp", group_fraction = 0.5 }]
positive_rate = 0.4
disparity_strength = 1.0
seed = 7
"#;

    #[test]
    fn minimal_config_gets_all_defaults() {
        let config = PipelineConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(config.seed, 0);
        assert_eq!(config.top_k, 20);
        assert_eq!(config.attributes, None);
        assert_eq!(config.split.train_fraction, 0.9);
        assert_eq!(config.split.repeats, 10);
        assert_eq!(config.train.learning_rate, 0.1);
        assert_eq!(config.train.max_epochs, 5000);
        assert_eq!(config.mitigation.learning_rate, 0.01);
        assert_eq!(config.mitigation.max_epochs, 2000);
        assert_eq!(config.mitigation.rate_mode, RateMode::Soft);
        assert_eq!(config.mitigation.early_stop_auroc_drop, 0.02);
        assert!(config.privileged.is_empty());
        assert_eq!(config.split_seed(), 1);
        assert_eq!(config.mitigation_seed(), 2);
    }

    #[test]
    fn round_trips_through_toml() {
        let mut config = PipelineConfig::from_toml_str(MINIMAL).unwrap();
        config.seed = 42;
        config.privileged.insert("grp".into(), 1);
        let text = config.to_toml();
        let back = PipelineConfig::from_toml_str(&text).unwrap();
        assert_eq!(config, back);
    }

    #[test]
    fn csv_source_parses() {
        let text = r#"
seed = 3
[data.csv]
path = "data/input.csv"
sensitive_columns = ["sex"]
"#;
        let config = PipelineConfig::from_toml_str(text).unwrap();
        let csv = config.data.csv.unwrap();
        assert_eq!(csv.path, PathBuf::from("data/input.csv"));
        assert_eq!(csv.label_column, "label");
        assert_eq!(csv.sensitive_columns, vec!["sex".to_string()]);
    }

    #[test]
    fn both_or_neither_data_source_is_rejected() {
        let both =
            format!("{MINIMAL}\n[data.csv]\npath = \"x.csv\"\nsensitive_columns = [\"g\"]\n");
        let err = PipelineConfig::from_toml_str(&both).unwrap_err();
        assert!(err.to_string().contains("not both"), "{err}");
        let err = PipelineConfig::from_toml_str("seed = 1\n[data]\n").unwrap_err();
        assert!(err.to_string().contains("data source is required"), "{err}");
    }

    #[test]
    fn unknown_keys_are_named_in_the_error() {
        let text = format!("learning_rage = 0.5\n{MINIMAL}");
        let err = PipelineConfig::from_toml_str(&text).unwrap_err();
        assert!(err.to_string().contains("learning_rage"), "{err}");
    }

    #[test]
    fn invalid_values_are_rejected() {
        // Snippets go before MINIMAL so top-level keys stay top-level
        // (anything after [data.generate] would belong to that table).
        for (snippet, needle) in [
            ("top_k = 0", "top_k"),
            ("attributes = []", "at least one"),
            ("attributes = [\"a\", \"a\"]", "twice"),
            ("[split]\ntrain_fraction = 1.5", "train_fraction"),
            ("[split]\nrepeats = 0", "repeats"),
            ("[privileged]\ngrp = 2", "0 or 1"),
            ("[mitigation]\nrate_mode = \"hard\"", "hard"),
            ("[train]\nlearning_rate = -1.0", "learning_rate"),
        ] {
            let text = format!("{snippet}\n{MINIMAL}");
            let err = PipelineConfig::from_toml_str(&text).unwrap_err();
            assert!(
                err.to_string().contains(needle),
                "snippet {snippet:?}: {err}"
            );
        }
    }

    #[test]
    fn csv_without_sensitive_columns_is_rejected() {
        let text = "[data.csv]\npath = \"x.csv\"\nsensitive_columns = []\n";
        let err = PipelineConfig::from_toml_str(text).unwrap_err();
        assert!(err.to_string().contains("sensitive_columns"), "{err}");
    }
}
