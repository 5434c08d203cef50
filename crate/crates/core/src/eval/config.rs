//! TOML experiment configuration.
//!
//! ```toml
//! seed = 42
//!
//! [hyperparams.rf]
//! n_trees = 200
//!
//! [hyperparams.gbt_hist]
//! n_bins = 63
//!
//! [sweep]
//! n_per_class = 50
//! horizontal = [0.5, 1.0, 2.0]
//!
//! [filter]
//! t_star_s = 8.0
//!
//! [[corpus.classes]]
//! label = "ECG"
//! count = 40
//! sample_rates_hz = [500.0]
//! # ... one table per class
//! ```
//!
//! Every section is optional. Hyperparameter tables override individual
//! fields of each algorithm's defaults. Without a `[corpus]` section the
//! desk-scale reference composition is used.

use std::path::Path;

use serde::Deserialize;

use crate::datasets::CorpusSpec;
use crate::ensemble::{Algorithm, Hyperparams};
use crate::error::{Error, Result};
use crate::features::FeatureConfig;
use crate::filter::FilterConfig;

use super::SweepKind;

/// Per-field overrides on top of [`Hyperparams::for_algorithm`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperparamOverrides {
    pub n_trees: Option<usize>,
    pub max_depth: Option<usize>,
    pub learning_rate: Option<f64>,
    pub max_features: Option<usize>,
    pub n_bins: Option<usize>,
    pub min_samples_leaf: Option<usize>,
    pub lambda: Option<f64>,
    pub gamma: Option<f64>,
}

impl HyperparamOverrides {
    pub fn apply(&self, mut hp: Hyperparams) -> Hyperparams {
        hp.n_trees = self.n_trees.unwrap_or(hp.n_trees);
        hp.max_depth = self.max_depth.unwrap_or(hp.max_depth);
        hp.learning_rate = self.learning_rate.unwrap_or(hp.learning_rate);
        hp.max_features = self.max_features.or(hp.max_features);
        hp.n_bins = self.n_bins.unwrap_or(hp.n_bins);
        hp.min_samples_leaf = self.min_samples_leaf.unwrap_or(hp.min_samples_leaf);
        hp.lambda = self.lambda.unwrap_or(hp.lambda);
        hp.gamma = self.gamma.unwrap_or(hp.gamma);
        hp
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperparamSet {
    pub rf: HyperparamOverrides,
    pub gbt_exact: HyperparamOverrides,
    pub gbt_hist: HyperparamOverrides,
}

impl HyperparamSet {
    pub fn get(&self, algorithm: Algorithm) -> Hyperparams {
        let o = match algorithm {
            Algorithm::RandomForest => &self.rf,
            Algorithm::GbtExact => &self.gbt_exact,
            Algorithm::GbtHistogram => &self.gbt_hist,
        };
        o.apply(Hyperparams::for_algorithm(algorithm))
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub n_per_class: usize,
    /// Seed of the held-out eval corpus; derived from the master seed when
    /// absent.
    pub eval_seed: Option<u64>,
    pub window_s: f64,
    pub horizontal: Vec<f64>,
    pub vertical: Vec<f64>,
    pub awgn: Vec<f64>,
    pub crop: Vec<f64>,
    pub superimpose: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            n_per_class: 50,
            eval_seed: None,
            window_s: 8.0,
            horizontal: SweepKind::Horizontal.default_grid(),
            vertical: SweepKind::Vertical.default_grid(),
            awgn: SweepKind::Awgn.default_grid(),
            crop: SweepKind::Crop.default_grid(),
            superimpose: SweepKind::Superimpose.default_grid(),
        }
    }
}

impl SweepConfig {
    pub fn grid(&self, kind: SweepKind) -> &[f64] {
        match kind {
            SweepKind::Horizontal => &self.horizontal,
            SweepKind::Vertical => &self.vertical,
            SweepKind::Awgn => &self.awgn,
            SweepKind::Crop => &self.crop,
            SweepKind::Superimpose => &self.superimpose,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationConfig {
    pub feature_counts: Vec<usize>,
    /// Per-class training sizes; sizes larger than the smallest class are
    /// skipped, and the full training set is always included.
    pub samples_per_class: Vec<usize>,
}

impl Default for AblationConfig {
    fn default() -> Self {
        AblationConfig {
            feature_counts: (1..=crate::features::N_FEATURES).collect(),
            samples_per_class: vec![50, 100, 200, 350],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    pub corpus: Option<CorpusSpec>,
    pub features: FeatureConfig,
    pub hyperparams: HyperparamSet,
    pub sweep: SweepConfig,
    pub ablation: AblationConfig,
    pub filter: FilterConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for a in Algorithm::ALL {
            cfg.hyperparams.get(a).validate()?;
        }
        if let Some(c) = &cfg.corpus {
            c.validate()?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        ExperimentConfig::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// The configured corpus with its seed replaced by `seed`, or the desk
    /// default.
    pub fn corpus_spec(&self, seed: u64) -> CorpusSpec {
        match &self.corpus {
            Some(c) => CorpusSpec {
                master_seed: seed,
                ..c.clone()
            },
            None => CorpusSpec::desk_default(seed),
        }
    }
}
