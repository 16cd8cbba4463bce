//! Fairness-aware logistic models with explanations of what changed.
//!
//! The pipeline has two phases. Phase one trains a performance-optimal
//! logistic model by cross-entropy descent, then fine-tunes its
//! coefficients to shrink the equalized-odds disparity (the gap in
//! true- and false-positive rates between the two groups of a sensitive
//! attribute), trading as little discrimination power as possible. Phase
//! two explains the adjustment: both models' predictions are decomposed
//! into exact per-feature Shapley attributions, features are ranked by
//! mean absolute attribution, and the features whose ranks moved most
//! form the explanation of how fairness was achieved.
//!
//! Entry points:
//!
//! * [`model::train_performance`] — phase-one training.
//! * [`mitigation::mitigate`] — the fairness fine-tune.
//! * [`shap::run_algorithm_1`] — the rank-movement explanation.
//! * [`pipeline::run_pipeline`] — everything end to end over repeated
//!   stratified splits, with reports written to disk.
//!
//! Synthetic data with a planted, tunable disparity is available through
//! [`data::generate`] for demos and for validating the pipeline against
//! known ground truth.

pub mod config;
pub mod data;
pub mod error;
pub mod metrics;
pub mod mitigation;
pub mod model;
pub mod pipeline;
pub mod report;
pub mod shap;

pub use config::PipelineConfig;
pub use data::{Dataset, GeneratorConfig, SensitiveSpec, Split, SplitPlan};
pub use error::{Error, Result};
pub use metrics::{EodPair, EvalReport};
pub use mitigation::{MitigationConfig, MitigationTrace, RateMode};
pub use model::{LogitModel, TrainConfig};
pub use pipeline::{run_pipeline, PipelineOutcome};
pub use report::RunReport;
pub use shap::{AttributionMatrix, AttributionScale, Explanation};
