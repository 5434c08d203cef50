//! Tree-ensemble classifiers: random forest and two gradient-boosted tree
//! variants (exact presorted splits and quantile-histogram splits).

pub mod metrics;
pub mod selection;
pub mod tree;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, FeatureVector};
use crate::rng;
use crate::signal::ClassLabel;
use tree::{BoostParams, CartParams, SplitSearch, Tree};

pub use metrics::{ClassMetrics, Metrics};
pub use selection::{
    forward_feature_selection, importance_ordered_ablation, stratified_split, AblationCell,
    AblationOrder, AblationPlan, SelectionTrace,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "rf")]
    RandomForest,
    #[serde(rename = "gbt_exact")]
    GbtExact,
    #[serde(rename = "gbt_hist")]
    GbtHistogram,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::RandomForest, Algorithm::GbtExact, Algorithm::GbtHistogram];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::RandomForest => "rf",
            Algorithm::GbtExact => "gbt_exact",
            Algorithm::GbtHistogram => "gbt_hist",
        }
    }

    pub fn is_boosted(self) -> bool {
        !matches!(self, Algorithm::RandomForest)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rf" | "random_forest" | "forest" => Ok(Algorithm::RandomForest),
            "gbt_exact" | "exact" | "xgb" | "xgboost" => Ok(Algorithm::GbtExact),
            "gbt_hist" | "hist" | "histogram" | "lgbm" | "lightgbm" => Ok(Algorithm::GbtHistogram),
            _ => Err(Error::InvalidParameter(format!(
                "unknown algorithm `{s}` (expected rf, gbt_exact or gbt_hist)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    /// Trees for the forest, boosting rounds for the GBT variants.
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    /// Features tried per split; `None` means floor(sqrt(F)) for the forest
    /// and all features for boosting.
    pub max_features: Option<usize>,
    pub n_bins: usize,
    pub min_samples_leaf: usize,
    pub lambda: f64,
    pub gamma: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            n_trees: 100,
            max_depth: 20,
            learning_rate: 0.1,
            max_features: None,
            n_bins: 255,
            min_samples_leaf: 1,
            lambda: 1.0,
            gamma: 0.0,
        }
    }
}

impl Hyperparams {
    pub fn for_algorithm(algorithm: Algorithm) -> Self {
        match algorithm {
            Algorithm::RandomForest => Hyperparams::default(),
            _ => Hyperparams {
                max_depth: 3,
                ..Hyperparams::default()
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if self.n_trees == 0 {
            return bad("n_trees must be positive");
        }
        if self.max_depth == 0 {
            return bad("max_depth must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("learning_rate must lie in (0, 1]");
        }
        if self.max_features == Some(0) {
            return bad("max_features must be positive");
        }
        if !(2..=u16::MAX as usize).contains(&self.n_bins) {
            return bad("n_bins must lie in 2..=65535");
        }
        if self.min_samples_leaf == 0 {
            return bad("min_samples_leaf must be positive");
        }
        if !(self.lambda >= 0.0 && self.gamma >= 0.0) {
            return bad("lambda and gamma must be non-negative");
        }
        Ok(())
    }
}

pub const MODEL_FORMAT: &str = "biogate-model";
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format: String,
    pub format_version: u32,
    pub algorithm: Algorithm,
    pub classes: Vec<ClassLabel>,
    pub feature_names: Vec<String>,
    pub fingerprint: String,
    pub hyperparams: Hyperparams,
    pub train_seed: u64,
    /// Forest: one tree per entry. Boosting: round-major, one tree per class.
    pub trees: Vec<Tree>,
}

/// Fits a classifier. Classes are the labels present, in the frozen order.
pub fn train(
    features: &FeatureMatrix,
    labels: &[ClassLabel],
    algorithm: Algorithm,
    hyperparams: &Hyperparams,
    seed: u64,
) -> Result<TrainedModel> {
    hyperparams.validate()?;
    if labels.len() != features.n_rows() {
        return Err(Error::InvalidParameter(format!(
            "{} labels for {} rows",
            labels.len(),
            features.n_rows()
        )));
    }
    features.check_finite()?;
    let classes: Vec<ClassLabel> = ClassLabel::ALL
        .into_iter()
        .filter(|c| labels.contains(c))
        .collect();
    if classes.len() < 2 {
        return Err(Error::SingleClassTraining);
    }
    if labels.len() < 2 * hyperparams.min_samples_leaf {
        return Err(Error::InsufficientSamples(format!(
            "{} rows cannot fill two leaves of {}",
            labels.len(),
            hyperparams.min_samples_leaf
        )));
    }
    let y: Vec<usize> = labels
        .iter()
        .map(|l| classes.iter().position(|c| c == l).unwrap())
        .collect();
    let cols: Vec<Vec<f64>> = (0..features.n_cols()).map(|c| features.column(c)).collect();

    let trees = match algorithm {
        Algorithm::RandomForest => train_forest(&cols, &y, classes.len(), hyperparams, seed),
        Algorithm::GbtExact | Algorithm::GbtHistogram => {
            train_boosted(&cols, &y, classes.len(), algorithm, hyperparams)
        }
    };
    Ok(TrainedModel {
        format: MODEL_FORMAT.to_string(),
        format_version: MODEL_FORMAT_VERSION,
        algorithm,
        classes,
        feature_names: features.names().to_vec(),
        fingerprint: features.fingerprint(),
        hyperparams: *hyperparams,
        train_seed: seed,
        trees,
    })
}

fn train_forest(cols: &[Vec<f64>], y: &[usize], k: usize, hp: &Hyperparams, seed: u64) -> Vec<Tree> {
    let n = y.len();
    let f = cols.len();
    let params = CartParams {
        max_depth: hp.max_depth,
        min_samples_leaf: hp.min_samples_leaf,
        max_features: hp
            .max_features
            .unwrap_or(((f as f64).sqrt().floor() as usize).max(1))
            .min(f),
    };
    (0..hp.n_trees)
        .into_par_iter()
        .map(|t| {
            use rand::Rng;
            let mut r = rng::stream(seed, &[t as u64]);
            let mut rows: Vec<usize> = (0..n).map(|_| r.random_range(0..n)).collect();
            rows.sort_unstable();
            tree::build_cart(cols, y, k, rows, &params, &mut r)
        })
        .collect()
}

fn train_boosted(cols: &[Vec<f64>], y: &[usize], k: usize, algorithm: Algorithm, hp: &Hyperparams) -> Vec<Tree> {
    let n = y.len();
    let params = BoostParams {
        max_depth: hp.max_depth,
        min_samples_leaf: hp.min_samples_leaf,
        lambda: hp.lambda,
        gamma: hp.gamma,
        learning_rate: hp.learning_rate,
    };
    let order: Vec<Vec<usize>>;
    let binned;
    let search = match algorithm {
        Algorithm::GbtHistogram => {
            binned = tree::Binned::new(cols, hp.n_bins);
            SplitSearch::Histogram { bins: &binned }
        }
        _ => {
            order = cols
                .iter()
                .map(|c| {
                    let mut o: Vec<usize> = (0..n).collect();
                    o.sort_by(|&a, &b| c[a].total_cmp(&c[b]));
                    o
                })
                .collect();
            SplitSearch::Exact { order: &order }
        }
    };

    let f = cols.len();
    let row_major: Vec<f64> = (0..n).flat_map(|i| cols.iter().map(move |c| c[i])).collect();
    let mut scores = vec![0.0; n * k];
    let mut trees = Vec::with_capacity(hp.n_trees * k);
    let mut prob = vec![0.0; n * k];
    for _ in 0..hp.n_trees {
        for i in 0..n {
            softmax_into(&scores[i * k..(i + 1) * k], &mut prob[i * k..(i + 1) * k]);
        }
        let round: Vec<Tree> = (0..k)
            .into_par_iter()
            .map(|c| {
                let grad: Vec<f64> = (0..n)
                    .map(|i| prob[i * k + c] - if y[i] == c { 1.0 } else { 0.0 })
                    .collect();
                let hess: Vec<f64> = (0..n)
                    .map(|i| {
                        let p = prob[i * k + c];
                        (p * (1.0 - p)).max(1e-16)
                    })
                    .collect();
                tree::build_boost_tree(cols, &grad, &hess, &search, &params)
            })
            .collect();
        for (c, t) in round.iter().enumerate() {
            for i in 0..n {
                scores[i * k + c] += t.leaf_for(&row_major[i * f..(i + 1) * f])[0];
            }
        }
        trees.extend(round);
    }
    trees
}

fn softmax_into(scores: &[f64], out: &mut [f64]) {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, s) in out.iter_mut().zip(scores) {
        *o = (s - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

/// Index of the largest value; ties go to the earliest.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

impl TrainedModel {
    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Boosting rounds (GBT) or trees (forest).
    pub fn n_rounds(&self) -> usize {
        if self.algorithm.is_boosted() {
            self.trees.len() / self.n_classes()
        } else {
            self.trees.len()
        }
    }

    /// The same model with only its first `rounds` boosting rounds or trees.
    pub fn truncated(&self, rounds: usize) -> TrainedModel {
        let per = if self.algorithm.is_boosted() { self.n_classes() } else { 1 };
        let mut m = self.clone();
        m.trees.truncate(rounds * per);
        m
    }

    pub fn check_fingerprint(&self, fingerprint: &str) -> Result<()> {
        if self.fingerprint != fingerprint {
            return Err(Error::FingerprintMismatch {
                expected: self.fingerprint.clone(),
                actual: fingerprint.to_string(),
            });
        }
        Ok(())
    }

    /// Probabilities for a raw row in the model's own column order. The
    /// caller is responsible for the column layout.
    pub fn predict_proba_row(&self, x: &[f64]) -> Vec<f64> {
        let k = self.n_classes();
        if self.algorithm.is_boosted() {
            let mut scores = vec![0.0; k];
            for (i, t) in self.trees.iter().enumerate() {
                scores[i % k] += t.leaf_for(x)[0];
            }
            let mut p = vec![0.0; k];
            softmax_into(&scores, &mut p);
            p
        } else if self.trees.is_empty() {
            vec![1.0 / k as f64; k]
        } else {
            let mut p = vec![0.0; k];
            for t in &self.trees {
                for (acc, v) in p.iter_mut().zip(t.leaf_for(x)) {
                    *acc += v;
                }
            }
            let n = self.trees.len() as f64;
            p.iter_mut().for_each(|v| *v /= n);
            p
        }
    }

    /// Probabilities over `self.classes` for a full extractor output.
    pub fn predict_proba(&self, features: &FeatureVector) -> Result<Vec<f64>> {
        self.check_fingerprint(&FeatureVector::fingerprint())?;
        Ok(self.predict_proba_row(&features.values))
    }

    pub fn predict(&self, features: &FeatureVector) -> Result<ClassLabel> {
        Ok(self.classes[argmax(&self.predict_proba(features)?)])
    }

    pub fn predict_proba_matrix(&self, features: &FeatureMatrix) -> Result<Vec<Vec<f64>>> {
        self.check_fingerprint(&features.fingerprint())?;
        Ok(features
            .rows()
            .collect::<Vec<_>>()
            .par_iter()
            .map(|r| self.predict_proba_row(r))
            .collect())
    }

    pub fn predict_matrix(&self, features: &FeatureMatrix) -> Result<Vec<ClassLabel>> {
        Ok(self
            .predict_proba_matrix(features)?
            .iter()
            .map(|p| self.classes[argmax(p)])
            .collect())
    }

    /// Split-gain importance per feature, normalized to sum 1 (uniform when
    /// the model never split).
    pub fn feature_importance(&self) -> Vec<(String, f64)> {
        let mut g = vec![0.0; self.n_features()];
        for t in &self.trees {
            t.add_gains(&mut g);
        }
        let total: f64 = g.iter().sum();
        let f = self.n_features() as f64;
        self.feature_names
            .iter()
            .zip(g)
            .map(|(n, v)| (n.clone(), if total > 0.0 { v / total } else { 1.0 / f }))
            .collect()
    }

    /// Mean accuracy drop when one column is shuffled, over `repeats` seeded
    /// shuffles per column.
    pub fn permutation_importance(
        &self,
        features: &FeatureMatrix,
        labels: &[ClassLabel],
        repeats: usize,
        seed: u64,
    ) -> Result<Vec<(String, f64)>> {
        use rand::seq::SliceRandom;
        let base = Metrics::compute(labels, &self.predict_matrix(features)?).accuracy;
        (0..self.n_features())
            .map(|col| {
                let mut drop = 0.0;
                for rep in 0..repeats {
                    let mut shuffled = features.clone();
                    let mut values = features.column(col);
                    values.shuffle(&mut rng::stream(seed, &[col as u64, rep as u64]));
                    for (r, v) in values.into_iter().enumerate() {
                        shuffled.set(r, col, v);
                    }
                    let acc = Metrics::compute(labels, &self.predict_matrix(&shuffled)?).accuracy;
                    drop += base - acc;
                }
                Ok((self.feature_names[col].clone(), drop / repeats.max(1) as f64))
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<TrainedModel> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::CorruptModel(e.to_string()))?;
        if value.get("format").and_then(|v| v.as_str()) != Some(MODEL_FORMAT) {
            return Err(Error::CorruptModel("not a model file".into()));
        }
        let version = value
            .get("format_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::CorruptModel("missing format_version".into()))?;
        if version != MODEL_FORMAT_VERSION as u64 {
            return Err(Error::VersionMismatch {
                found: version.min(u32::MAX as u64) as u32,
                expected: MODEL_FORMAT_VERSION,
            });
        }
        let model: TrainedModel =
            serde_json::from_value(value).map_err(|e| Error::CorruptModel(e.to_string()))?;
        model.validate().map_err(Error::CorruptModel)?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<TrainedModel> {
        TrainedModel::from_json(&std::fs::read_to_string(path)?)
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.classes.len() < 2 {
            return Err("fewer than two classes".into());
        }
        if self.fingerprint != crate::features::fingerprint(&self.feature_names) {
            return Err("fingerprint does not match feature names".into());
        }
        let leaf_len = if self.algorithm.is_boosted() {
            if self.trees.len() % self.classes.len() != 0 {
                return Err("tree count is not a whole number of rounds".into());
            }
            1
        } else {
            self.classes.len()
        };
        for (i, t) in self.trees.iter().enumerate() {
            t.validate(self.n_features(), leaf_len)
                .map_err(|e| format!("tree {i}: {e}"))?;
        }
        Ok(())
    }
}

pub fn save_model(model: &TrainedModel, path: &Path) -> Result<()> {
    model.save(path)
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    TrainedModel::load(path)
}
