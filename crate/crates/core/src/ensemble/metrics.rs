//! Accuracy and per-class / macro-averaged F1.

use serde::Serialize;

use crate::signal::ClassLabel;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub label: ClassLabel,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
    pub predicted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub accuracy: f64,
    /// Unweighted mean F1 over classes that occur in the truth or the
    /// predictions.
    pub macro_f1: f64,
    pub per_class: Vec<ClassMetrics>,
    pub n: usize,
}

impl Metrics {
    pub fn compute(truth: &[ClassLabel], predicted: &[ClassLabel]) -> Metrics {
        assert_eq!(truth.len(), predicted.len(), "truth/prediction length mismatch");
        let n = truth.len();
        let correct = truth.iter().zip(predicted).filter(|(a, b)| a == b).count();
        let per_class: Vec<ClassMetrics> = ClassLabel::ALL
            .into_iter()
            .map(|label| {
                let tp = truth
                    .iter()
                    .zip(predicted)
                    .filter(|(t, p)| **t == label && **p == label)
                    .count();
                let support = truth.iter().filter(|t| **t == label).count();
                let pred = predicted.iter().filter(|p| **p == label).count();
                let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
                let precision = ratio(tp, pred);
                let recall = ratio(tp, support);
                let f1 = if tp == 0 {
                    0.0
                } else {
                    2.0 * precision * recall / (precision + recall)
                };
                ClassMetrics {
                    label,
                    precision,
                    recall,
                    f1,
                    support,
                    predicted: pred,
                }
            })
            .collect();
        let active: Vec<&ClassMetrics> = per_class
            .iter()
            .filter(|c| c.support > 0 || c.predicted > 0)
            .collect();
        let macro_f1 = if active.is_empty() {
            0.0
        } else {
            active.iter().map(|c| c.f1).sum::<f64>() / active.len() as f64
        };
        Metrics {
            accuracy: if n == 0 { 0.0 } else { correct as f64 / n as f64 },
            macro_f1,
            per_class,
            n,
        }
    }
}
