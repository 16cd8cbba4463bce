//! Command-line driver for fairness-aware model training and explanation.
//!
//! `fairshap pipeline` runs the whole protocol from one config file:
//! load or generate data, repeat stratified splits, train a baseline
//! model per split, fine-tune it per sensitive attribute, evaluate both
//! models, and explain the adjustment through feature-importance rank
//! movements. The remaining subcommands each run a single phase against
//! the same on-disk artifacts (CSV datasets, key-value model files, JSON
//! reports), so phases can also be scripted independently.
//!
//! Set `FAIRSHAP_LOG` (e.g. `info`, `debug`) to see progress on stderr;
//! there is deliberately no verbosity flag.
//!
//! Exit codes: 0 on success, 2 for configuration or usage problems, 3
//! for data problems, 4 for numerical failures, 5 for I/O failures.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fairshap::config::PipelineConfig;
use fairshap::data::{generate, load_csv, write_csv, Dataset};
use fairshap::metrics::evaluate_with_privileged;
use fairshap::mitigation::mitigate;
use fairshap::model::train_performance;
use fairshap::pipeline::run_pipeline;
use fairshap::report::write_trace_records;
use fairshap::shap::run_algorithm_1;
use fairshap::{Error, LogitModel, Result};

#[derive(Parser)]
#[command(
    name = "fairshap",
    version,
    about = "Train a performance-optimal classifier, fine-tune it for group \
             fairness, and explain what changed"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline from a config file and write all artifacts.
    Pipeline {
        /// Pipeline config (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
        /// Override the config's global seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Mitigate only these attributes (repeatable); default: the
        /// config's list, or every sensitive column.
        #[arg(long = "attribute")]
        attributes: Vec<String>,
    },
    /// Draw the config's synthetic dataset and write it as CSV.
    Generate {
        #[arg(long)]
        config: PathBuf,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the baseline model on a dataset CSV.
    Train {
        /// Pipeline config supplying column names and training settings.
        #[arg(long)]
        config: PathBuf,
        /// Dataset CSV (e.g. from `generate`).
        #[arg(long)]
        data: PathBuf,
        /// Output model file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fine-tune a trained model to shrink one attribute's disparity.
    Mitigate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Model to start from (e.g. from `train`).
        #[arg(long)]
        model: PathBuf,
        /// Sensitive attribute to mitigate.
        #[arg(long)]
        attribute: String,
        /// Output model file.
        #[arg(long)]
        out: PathBuf,
        /// Also write the per-epoch descent trace as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Score a model on a dataset: AUROC, sensitivity, specificity, and
    /// per-attribute group gaps, written as JSON.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Output JSON path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare two models' feature-importance rankings, written as JSON.
    Explain {
        #[arg(long)]
        config: PathBuf,
        /// Rows the importance background is averaged over.
        #[arg(long)]
        train_data: PathBuf,
        /// Rows whose attributions are ranked.
        #[arg(long)]
        test_data: PathBuf,
        /// The before model.
        #[arg(long)]
        baseline: PathBuf,
        /// The after model.
        #[arg(long)]
        adjusted: PathBuf,
        /// Output JSON path.
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("FAIRSHAP_LOG")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Pipeline {
            config,
            out,
            seed,
            attributes,
        } => {
            let mut config = PipelineConfig::load(&config)?;
            if let Some(seed) = seed {
                config.seed = seed;
            }
            if !attributes.is_empty() {
                config.attributes = Some(attributes);
            }
            let outcome = run_pipeline(&config, &out)?;
            println!("{}", outcome.report.summary_text());
            println!(
                "wrote {} files under {}",
                outcome.written.len(),
                out.display()
            );
            Ok(())
        }
        Command::Generate { config, out } => {
            let config = PipelineConfig::load(&config)?;
            let generator = config.data.generate.as_ref().ok_or_else(|| {
                Error::config("this config reads a CSV; `generate` needs a [data.generate] table")
            })?;
            let dataset = generate(generator)?;
            write_csv(&dataset, &out)?;
            println!("wrote {} rows to {}", dataset.n_rows(), out.display());
            Ok(())
        }
        Command::Train { config, data, out } => {
            let config = PipelineConfig::load(&config)?;
            let dataset = dataset_from(&config, &data)?;
            let model = train_performance(&dataset, &config.train)?;
            model.save(&out)?;
            println!("wrote model to {}", out.display());
            Ok(())
        }
        Command::Mitigate {
            config,
            data,
            model,
            attribute,
            out,
            trace,
        } => {
            let config = PipelineConfig::load(&config)?;
            let dataset = dataset_from(&config, &data)?;
            let model = LogitModel::load(&model)?;
            let mitigation = config
                .mitigation
                .to_config(&attribute, config.mitigation_seed());
            let (fair, diagnostics) = mitigate(&model, &dataset, &mitigation)?;
            fair.save(&out)?;
            if let Some(trace_path) = &trace {
                write_trace_records(trace_path, &diagnostics.records)?;
            }
            println!(
                "wrote model to {} ({} epochs, stop: {:?}{})",
                out.display(),
                diagnostics.epochs,
                diagnostics.stop,
                if diagnostics.reverted {
                    ", reverted"
                } else {
                    ""
                }
            );
            Ok(())
        }
        Command::Evaluate {
            config,
            data,
            model,
            out,
        } => {
            let config = PipelineConfig::load(&config)?;
            let dataset = dataset_from(&config, &data)?;
            let model = LogitModel::load(&model)?;
            let report = evaluate_with_privileged(&model, &dataset, &config.privileged)?;
            write_json(&out, &report)?;
            println!("wrote evaluation to {}", out.display());
            Ok(())
        }
        Command::Explain {
            config,
            train_data,
            test_data,
            baseline,
            adjusted,
            out,
        } => {
            let config = PipelineConfig::load(&config)?;
            let train = dataset_from(&config, &train_data)?;
            let test = dataset_from(&config, &test_data)?;
            let baseline = LogitModel::load(&baseline)?;
            let adjusted = LogitModel::load(&adjusted)?;
            let explanation = run_algorithm_1(&baseline, &adjusted, &train, &test, config.top_k)?;
            write_json(&out, &explanation)?;
            let movers = &explanation.deltas.most_changed;
            if movers.is_empty() {
                println!("no feature changed importance rank");
            } else {
                println!("most-changed features: {}", movers.join(", "));
            }
            println!("wrote explanation to {}", out.display());
            Ok(())
        }
    }
}

/// Load a dataset CSV using the column names the config implies: the CSV
/// section's explicit names, or `label` plus the generator's sensitive
/// attributes for configs that generate their data.
fn dataset_from(config: &PipelineConfig, path: &Path) -> Result<Dataset> {
    let (label_column, sensitive_columns) = match (&config.data.csv, &config.data.generate) {
        (Some(csv), _) => (csv.label_column.clone(), csv.sensitive_columns.clone()),
        (None, Some(generator)) => (
            "label".to_string(),
            generator.sensitive.iter().map(|s| s.name.clone()).collect(),
        ),
        (None, None) => return Err(Error::config("the config declares no data source")),
    };
    load_csv(path, &label_column, &sensitive_columns)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::data(format!("serializing {}: {e}", path.display())))?;
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_declaration_is_internally_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
