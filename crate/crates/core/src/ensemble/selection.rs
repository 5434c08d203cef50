//! Greedy forward feature selection and importance-ordered ablation grids.

use rand::seq::SliceRandom;
use serde::Serialize;

use super::{train, Algorithm, Hyperparams, Metrics};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::rng;
use crate::signal::ClassLabel;

/// Per-class seeded split; every class keeps at least one training row.
/// Both index lists come back sorted.
pub fn stratified_split(labels: &[ClassLabel], train_frac: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in ClassLabel::ALL {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if idx.is_empty() {
            continue;
        }
        idx.shuffle(&mut rng::stream(seed, &[class.index() as u64]));
        let n_train = ((idx.len() as f64 * train_frac).round() as usize).clamp(1, idx.len());
        train.extend_from_slice(&idx[..n_train]);
        test.extend_from_slice(&idx[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

fn pick<T: Copy>(xs: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| xs[i]).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionTrace {
    /// Column indices in the order they were added.
    pub order: Vec<usize>,
    pub names: Vec<String>,
    /// Validation accuracy after each addition.
    pub accuracy: Vec<f64>,
}

/// Adds, one at a time, the feature that maximizes validation accuracy on an
/// internal seeded 70/30 split. Ties go to the lower column index.
pub fn forward_feature_selection(
    features: &FeatureMatrix,
    labels: &[ClassLabel],
    algorithm: Algorithm,
    hyperparams: &Hyperparams,
    seed: u64,
) -> Result<SelectionTrace> {
    let f = features.n_cols();
    if f < 2 {
        return Err(Error::InvalidParameter("forward selection needs at least two features".into()));
    }
    let (tr, va) = stratified_split(labels, 0.7, seed);
    let (xtr, ytr) = (features.select_rows(&tr), pick(labels, &tr));
    let (xva, yva) = (features.select_rows(&va), pick(labels, &va));

    let mut chosen: Vec<usize> = Vec::new();
    let mut trace = SelectionTrace {
        order: Vec::new(),
        names: Vec::new(),
        accuracy: Vec::new(),
    };
    while chosen.len() < f {
        let mut best: Option<(usize, f64)> = None;
        for cand in (0..f).filter(|c| !chosen.contains(c)) {
            let mut cols = chosen.clone();
            cols.push(cand);
            let model = train(&xtr.select_columns(&cols), &ytr, algorithm, hyperparams, seed)?;
            let pred = model.predict_matrix(&xva.select_columns(&cols))?;
            let acc = Metrics::compute(&yva, &pred).accuracy;
            if best.is_none_or(|(_, b)| acc > b) {
                best = Some((cand, acc));
            }
        }
        let (c, acc) = best.expect("at least one candidate remains");
        chosen.push(c);
        trace.order.push(c);
        trace.names.push(features.names()[c].clone());
        trace.accuracy.push(acc);
    }
    Ok(trace)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationOrder {
    /// Subsets grow from the least important feature upward.
    LeastImportantFirst,
    MostImportantFirst,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationPlan {
    pub feature_counts: Vec<usize>,
    /// `None` trains on every training row.
    pub samples_per_class: Vec<Option<usize>>,
    pub order: AblationOrder,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationCell {
    pub n_features: usize,
    pub samples_per_class: Option<usize>,
    pub features: Vec<String>,
    pub accuracy: f64,
    pub macro_f1: f64,
}

/// Ranks features by the split-gain importance of a model trained on the
/// full training set, then retrains on importance-ordered prefixes of the
/// ranking and per-class subsamples. Selected columns keep their original
/// order, so the full-size cell reproduces the plain train/test result.
#[allow(clippy::too_many_arguments)]
pub fn importance_ordered_ablation(
    train_x: &FeatureMatrix,
    train_y: &[ClassLabel],
    test_x: &FeatureMatrix,
    test_y: &[ClassLabel],
    algorithm: Algorithm,
    hyperparams: &Hyperparams,
    plan: &AblationPlan,
    seed: u64,
) -> Result<Vec<AblationCell>> {
    let f = train_x.n_cols();
    if let Some(bad) = plan.feature_counts.iter().find(|&&n| n == 0 || n > f) {
        return Err(Error::InvalidParameter(format!("feature count {bad} outside 1..={f}")));
    }
    let reference = train(train_x, train_y, algorithm, hyperparams, seed)?;
    let importance = reference.feature_importance();
    let mut ranking: Vec<usize> = (0..f).collect();
    // stable sort keeps lower indices first among equal importances
    ranking.sort_by(|&a, &b| importance[a].1.total_cmp(&importance[b].1));
    if plan.order == AblationOrder::MostImportantFirst {
        ranking.sort_by(|&a, &b| importance[b].1.total_cmp(&importance[a].1));
    }

    let mut cells = Vec::new();
    for &spc in &plan.samples_per_class {
        let rows = match spc {
            None => (0..train_y.len()).collect::<Vec<_>>(),
            Some(s) => subsample_per_class(train_y, s, seed)?,
        };
        let sub_x = train_x.select_rows(&rows);
        let sub_y = pick(train_y, &rows);
        for &n in &plan.feature_counts {
            let mut cols = ranking[..n].to_vec();
            cols.sort_unstable();
            let model = train(&sub_x.select_columns(&cols), &sub_y, algorithm, hyperparams, seed)?;
            let pred = model.predict_matrix(&test_x.select_columns(&cols))?;
            let m = Metrics::compute(test_y, &pred);
            cells.push(AblationCell {
                n_features: n,
                samples_per_class: spc,
                features: cols.iter().map(|&c| train_x.names()[c].clone()).collect(),
                accuracy: m.accuracy,
                macro_f1: m.macro_f1,
            });
        }
    }
    Ok(cells)
}

fn subsample_per_class(labels: &[ClassLabel], per_class: usize, seed: u64) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for class in ClassLabel::ALL {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if idx.is_empty() {
            continue;
        }
        if idx.len() < per_class {
            return Err(Error::InsufficientSamples(format!(
                "{class} has {} training rows, {per_class} requested",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng::stream(seed, &[u64::MAX, class.index() as u64]));
        out.extend_from_slice(&idx[..per_class]);
    }
    out.sort_unstable();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_is_a_partition_with_stratified_ratio() {
        let labels: Vec<ClassLabel> = (0..100)
            .map(|i| if i % 4 == 0 { ClassLabel::Eeg } else { ClassLabel::Ecg })
            .collect();
        let (tr, te) = stratified_split(&labels, 0.7, 5);
        assert_eq!(tr.len() + te.len(), 100);
        let mut all: Vec<usize> = tr.iter().chain(&te).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        let eeg_train = tr.iter().filter(|&&i| labels[i] == ClassLabel::Eeg).count();
        assert_eq!(eeg_train, 18); // round(25 * 0.7)
        assert_eq!(stratified_split(&labels, 0.7, 5), (tr, te));
    }

    #[test]
    fn single_item_class_goes_to_train() {
        let labels = [ClassLabel::Ecg, ClassLabel::Eeg, ClassLabel::Eeg];
        let (tr, _) = stratified_split(&labels, 0.1, 1);
        assert!(tr.contains(&0));
    }

    #[test]
    fn subsample_rejects_oversized_requests() {
        let labels = [ClassLabel::Ecg, ClassLabel::Eeg, ClassLabel::Eeg];
        assert!(matches!(
            subsample_per_class(&labels, 2, 0),
            Err(Error::InsufficientSamples(_))
        ));
        assert_eq!(subsample_per_class(&labels, 1, 0).unwrap().len(), 2);
    }
}
