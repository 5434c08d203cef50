//! Metrics, timing and ablation tables.

use std::io::Write;
use std::time::Instant;

use serde::Serialize;

use crate::ensemble::{train, AblationCell, Algorithm, Metrics};
use crate::error::Result;
use crate::features::FeatureMatrix;
use crate::signal::ClassLabel;

use super::config::HyperparamSet;

/// Long format `algorithm,class,metric,value`. Per-class rows carry
/// precision, recall, f1 and support; the `ALL` rows carry accuracy and
/// macro_f1 (unweighted mean of per-class F1).
pub fn write_metrics_csv<W: Write>(mut w: W, results: &[(Algorithm, Metrics)]) -> Result<()> {
    let mut out = String::from("algorithm,class,metric,value\n");
    for (a, m) in results {
        for c in &m.per_class {
            let l = c.label;
            out.push_str(&format!("{a},{l},precision,{}\n", c.precision));
            out.push_str(&format!("{a},{l},recall,{}\n", c.recall));
            out.push_str(&format!("{a},{l},f1,{}\n", c.f1));
            out.push_str(&format!("{a},{l},support,{}\n", c.support));
        }
        out.push_str(&format!("{a},ALL,accuracy,{}\n", m.accuracy));
        out.push_str(&format!("{a},ALL,macro_f1,{}\n", m.macro_f1));
        out.push_str(&format!("{a},ALL,n,{}\n", m.n));
    }
    w.write_all(out.as_bytes())?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingRow {
    pub algorithm: Algorithm,
    pub n_train: usize,
    pub n_test: usize,
    pub train_s: f64,
    /// Whole test matrix.
    pub predict_test_s: f64,
    /// Mean over repeated single-vector predictions.
    pub predict_one_s: f64,
}

const SINGLE_REPEATS: usize = 200;

/// Wall-clock training and prediction times, one row per algorithm in the
/// order given.
pub fn run_timing(
    train_x: &FeatureMatrix,
    train_y: &[ClassLabel],
    test_x: &FeatureMatrix,
    algorithms: &[Algorithm],
    hyperparams: &HyperparamSet,
    seed: u64,
) -> Result<Vec<TimingRow>> {
    let mut rows = Vec::with_capacity(algorithms.len());
    for &a in algorithms {
        let t = Instant::now();
        let model = train(train_x, train_y, a, &hyperparams.get(a), seed)?;
        let train_s = t.elapsed().as_secs_f64();

        let t = Instant::now();
        let pred = model.predict_matrix(test_x)?;
        let predict_test_s = t.elapsed().as_secs_f64();
        std::hint::black_box(pred);

        let predict_one_s = if test_x.n_rows() == 0 {
            0.0
        } else {
            let t = Instant::now();
            for i in 0..SINGLE_REPEATS {
                std::hint::black_box(model.predict_proba_row(test_x.row(i % test_x.n_rows())));
            }
            t.elapsed().as_secs_f64() / SINGLE_REPEATS as f64
        };
        rows.push(TimingRow {
            algorithm: a,
            n_train: train_x.n_rows(),
            n_test: test_x.n_rows(),
            train_s,
            predict_test_s,
            predict_one_s,
        });
    }
    Ok(rows)
}

pub fn write_timing_csv<W: Write>(mut w: W, rows: &[TimingRow]) -> Result<()> {
    let mut out = String::from("algorithm,n_train,n_test,train_s,predict_test_s,predict_one_s\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.algorithm, r.n_train, r.n_test, r.train_s, r.predict_test_s, r.predict_one_s
        ));
    }
    w.write_all(out.as_bytes())?;
    Ok(())
}

/// `algorithm,n_features,samples_per_class,accuracy,macro_f1,features`, with
/// `all` for the full training set and features joined by `;`.
pub fn write_ablation_csv<W: Write>(mut w: W, results: &[(Algorithm, Vec<AblationCell>)]) -> Result<()> {
    let mut out = String::from("algorithm,n_features,samples_per_class,accuracy,macro_f1,features\n");
    for (a, cells) in results {
        for c in cells {
            let n = c.samples_per_class.map_or("all".to_string(), |n| n.to_string());
            out.push_str(&format!(
                "{a},{},{n},{},{},{}\n",
                c.n_features,
                c.accuracy,
                c.macro_f1,
                c.features.join(";")
            ));
        }
    }
    w.write_all(out.as_bytes())?;
    Ok(())
}
