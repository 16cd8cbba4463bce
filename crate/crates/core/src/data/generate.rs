//! Seeded synthetic data with a plantable group disparity.
//!
//! Labels are drawn from a logistic model over the informative columns plus
//! `disparity_strength * z` for every sensitive attribute, with the intercept
//! calibrated by bisection so the realized positive rate matches the
//! configured one. Noise columns carry no label signal. In addition, one
//! `proxy_<attr>` column per sensitive attribute encodes group membership
//! plus Gaussian noise *without* entering the label model: it is the only
//! feature correlated with the group, so it is the observable channel a
//! fairness fine-tune has to act on, and the feature whose importance rank is
//! expected to shift.
//!
//! Draw order is fixed (group columns, informative columns, noise columns,
//! proxy columns, labels), so a fixed seed reproduces the dataset
//! bit-for-bit.

use std::collections::BTreeMap;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::sigmoid;

/// One sensitive attribute to synthesize.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensitiveSpec {
    /// Attribute name; the generated column uses it directly and the proxy
    /// column is named `proxy_<name>`.
    pub name: String,
    /// Probability that a row belongs to group 1 (the larger group when
    /// > 0.5, making 1 the privileged group under the representation rule).
    pub group_fraction: f64,
}

/// Configuration for [`generate`].
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    /// Number of rows (>= 2).
    pub n: usize,
    /// Number of informative feature columns (>= 1), named `inf01`, ...
    pub m_informative: usize,
    /// Number of pure-noise feature columns, named `noise01`, ...
    #[serde(default)]
    pub m_noise: usize,
    /// Sensitive attributes to synthesize (at least one).
    pub sensitive: Vec<SensitiveSpec>,
    /// Target share of positive labels, in (0, 1).
    pub positive_rate: f64,
    /// Coefficient on each group indicator in the label logit; 0 plants no
    /// disparity, larger values shift the label distribution of group 1.
    pub disparity_strength: f64,
    /// RNG seed; a fixed seed reproduces the dataset exactly.
    pub seed: u64,
}

/// The generating model behind a synthesized dataset, for diagnostics and
/// tests: per-row logits plus the coefficients that produced them.
#[derive(Debug, Clone)]
pub struct GeneratedTruth {
    /// Coefficients on the informative columns, in column order.
    pub informative_weights: Vec<f64>,
    /// Calibrated intercept.
    pub intercept: f64,
    /// Per-row label logits (intercept included).
    pub logits: Vec<f64>,
}

impl GeneratorConfig {
    fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::config(format!("n must be >= 2, got {}", self.n)));
        }
        if self.m_informative < 1 {
            return Err(Error::config("m_informative must be >= 1"));
        }
        if self.sensitive.is_empty() {
            return Err(Error::config("at least one sensitive attribute required"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for spec in &self.sensitive {
            if spec.name.is_empty() {
                return Err(Error::config("sensitive attribute name is empty"));
            }
            if spec.name == "label" {
                return Err(Error::config("sensitive attribute cannot be named `label`"));
            }
            if !seen.insert(spec.name.as_str()) {
                return Err(Error::config(format!(
                    "duplicate sensitive attribute `{}`",
                    spec.name
                )));
            }
            if !(spec.group_fraction > 0.0 && spec.group_fraction < 1.0) {
                return Err(Error::config(format!(
                    "group_fraction for `{}` must be in (0, 1), got {}",
                    spec.name, spec.group_fraction
                )));
            }
        }
        if !(self.positive_rate > 0.0 && self.positive_rate < 1.0) {
            return Err(Error::config(format!(
                "positive_rate must be in (0, 1), got {}",
                self.positive_rate
            )));
        }
        if !(self.disparity_strength >= 0.0 && self.disparity_strength.is_finite()) {
            return Err(Error::config(format!(
                "disparity_strength must be a finite non-negative real, got {}",
                self.disparity_strength
            )));
        }
        Ok(())
    }
}

/// Standard deviation of the Gaussian noise on each proxy column. Chosen so
/// the proxy is informative enough to act on (a fine-tune can shift one
/// group's scores through it) but too noisy for a score model to reconstruct
/// the group outright — if it could, fitting would absorb the planted shift
/// and leave no disparity to mitigate.
const PROXY_NOISE_SD: f64 = 3.0;

/// Deterministic informative coefficients: alternating sign, decaying
/// magnitude, so the informative columns have distinct importances. The
/// scale keeps the informative signal moderate next to a unit group shift,
/// so mid-range disparity_strength values plant a disparity that is clearly
/// visible in held-out error rates rather than drowned by feature signal.
fn informative_weights(m: usize) -> Vec<f64> {
    (0..m)
        .map(|j| {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            sign * 0.85 / ((j + 1) as f64).sqrt()
        })
        .collect()
}

/// Calibrate the intercept so that `mean(sigmoid(logit + b0))` hits the
/// target rate; the mean is monotone in `b0`, so bisection suffices.
fn calibrate_intercept(raw_logits: &[f64], target: f64) -> f64 {
    let mean_rate = |b0: f64| -> f64 {
        raw_logits.iter().map(|&l| sigmoid(l + b0)).sum::<f64>() / raw_logits.len() as f64
    };
    let (mut lo, mut hi) = (-700.0_f64, 700.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_rate(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Synthesize a dataset together with its generating model.
pub fn generate_with_truth(config: &GeneratorConfig) -> Result<(Dataset, GeneratedTruth)> {
    config.validate()?;
    let n = config.n;
    let m = config.m_informative + config.m_noise + config.sensitive.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut groups: BTreeMap<String, Vec<u8>> = BTreeMap::new();
    for spec in &config.sensitive {
        let column: Vec<u8> = (0..n)
            .map(|_| u8::from(rng.random::<f64>() < spec.group_fraction))
            .collect();
        groups.insert(spec.name.clone(), column);
    }

    let mut features = Array2::<f64>::zeros((n, m));
    let mut feature_names = Vec::with_capacity(m);
    let weights = informative_weights(config.m_informative);
    for j in 0..config.m_informative {
        feature_names.push(format!("inf{:02}", j + 1));
        for i in 0..n {
            features[[i, j]] = rng.sample::<f64, _>(StandardNormal);
        }
    }
    for j in 0..config.m_noise {
        feature_names.push(format!("noise{:02}", j + 1));
        for i in 0..n {
            features[[i, config.m_informative + j]] = rng.sample::<f64, _>(StandardNormal);
        }
    }
    for (a, spec) in config.sensitive.iter().enumerate() {
        feature_names.push(format!("proxy_{}", spec.name));
        let col = config.m_informative + config.m_noise + a;
        let z = &groups[&spec.name];
        for i in 0..n {
            let noise: f64 = rng.sample(StandardNormal);
            features[[i, col]] = (f64::from(z[i]) - spec.group_fraction) + PROXY_NOISE_SD * noise;
        }
    }

    let mut raw_logits = vec![0.0; n];
    for i in 0..n {
        let mut logit = 0.0;
        for (j, w) in weights.iter().enumerate() {
            logit += w * features[[i, j]];
        }
        for spec in &config.sensitive {
            logit += config.disparity_strength * f64::from(groups[&spec.name][i]);
        }
        raw_logits[i] = logit;
    }
    let intercept = calibrate_intercept(&raw_logits, config.positive_rate);
    let logits: Vec<f64> = raw_logits.iter().map(|&l| l + intercept).collect();

    let labels: Vec<u8> = logits
        .iter()
        .map(|&l| u8::from(rng.random::<f64>() < sigmoid(l)))
        .collect();

    let dataset = Dataset::new(features, feature_names, labels, groups)?;
    let truth = GeneratedTruth {
        informative_weights: weights,
        intercept,
        logits,
    };
    Ok((dataset, truth))
}

/// Synthesize a dataset (see [`generate_with_truth`] for the model).
pub fn generate(config: &GeneratorConfig) -> Result<Dataset> {
    generate_with_truth(config).map(|(d, _)| d)
}
