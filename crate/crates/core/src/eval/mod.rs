//! Experiment runners: robustness sweeps, timing, and CSV / SVG reports.

pub mod config;
pub mod report;
pub mod svg;

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::{Corpus, CorpusSpec, Split};
use crate::distortion::{add_awgn, horizontal_scale, random_crop, superimpose, vertical_scale};
use crate::ensemble::{Algorithm, Metrics, TrainedModel};
use crate::error::{Error, Result};
use crate::features::fuzzy::std_dev;
use crate::features::{extract_batch, FeatureConfig, FeatureMatrix, FeatureVector};
use crate::rng::derive_seed;
use crate::signal::{samples_for, ClassLabel, Segment};

pub use config::{ExperimentConfig, HyperparamSet, SweepConfig};
pub use report::{run_timing, write_ablation_csv, write_metrics_csv, write_timing_csv, TimingRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Horizontal,
    Vertical,
    /// Grid values are noise standard deviations relative to each segment's
    /// own standard deviation.
    Awgn,
    /// Grid values are crop lengths in seconds.
    Crop,
    /// Grid values are carrier gains after scaling each audio carrier to the
    /// segment's standard deviation.
    Superimpose,
}

impl SweepKind {
    pub const ALL: [SweepKind; 5] = [
        SweepKind::Horizontal,
        SweepKind::Vertical,
        SweepKind::Awgn,
        SweepKind::Crop,
        SweepKind::Superimpose,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SweepKind::Horizontal => "horizontal",
            SweepKind::Vertical => "vertical",
            SweepKind::Awgn => "awgn",
            SweepKind::Crop => "crop",
            SweepKind::Superimpose => "superimpose",
        }
    }

    pub fn default_grid(self) -> Vec<f64> {
        match self {
            SweepKind::Horizontal | SweepKind::Vertical => vec![0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0],
            SweepKind::Awgn => vec![0.0, 0.05, 0.1, 0.2, 0.5, 1.0],
            SweepKind::Crop => vec![1.0, 2.0, 4.0, 6.0, 8.0],
            SweepKind::Superimpose => vec![0.0, 0.1, 0.25, 0.5, 1.0, 2.0],
        }
    }

    pub fn axis_label(self) -> &'static str {
        match self {
            SweepKind::Horizontal => "horizontal scale factor alpha",
            SweepKind::Vertical => "vertical scale factor alpha",
            SweepKind::Awgn => "AWGN sigma / signal std",
            SweepKind::Crop => "segment length T (s)",
            SweepKind::Superimpose => "audio carrier gain (std ratio)",
        }
    }
}

impl fmt::Display for SweepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "horizontal" | "horizontal_scale" | "hscale" => Ok(SweepKind::Horizontal),
            "vertical" | "vertical_scale" | "vscale" => Ok(SweepKind::Vertical),
            "awgn" | "noise" => Ok(SweepKind::Awgn),
            "crop" => Ok(SweepKind::Crop),
            "superimpose" | "audio" => Ok(SweepKind::Superimpose),
            _ => Err(Error::InvalidParameter(format!(
                "unknown sweep kind `{s}` (expected horizontal, vertical, awgn, crop or superimpose)"
            ))),
        }
    }
}

/// Labeled segments scored by the sweeps.
#[derive(Debug, Clone, Default)]
pub struct EvalSet {
    pub ids: Vec<String>,
    pub labels: Vec<ClassLabel>,
    pub segments: Vec<Segment>,
}

impl EvalSet {
    pub fn from_corpus(corpus: &Corpus, split: Option<Split>) -> EvalSet {
        let mut set = EvalSet::default();
        for item in corpus.items.iter().filter(|i| split.is_none_or(|s| i.split == s)) {
            set.ids.push(item.id.clone());
            set.labels.push(item.label);
            set.segments.push(item.segment.clone());
        }
        set
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Size of the smallest class (0 if any class is missing).
    pub fn n_per_class(&self) -> usize {
        ClassLabel::ALL
            .iter()
            .map(|&c| self.labels.iter().filter(|&&l| l == c).count())
            .min()
            .unwrap_or(0)
    }
}

/// Held-out evaluation corpus: the reference composition with `n_per_class`
/// clean segments per class and no distortion recipes.
pub fn eval_corpus_spec(seed: u64, n_per_class: usize) -> CorpusSpec {
    let mut spec = CorpusSpec::scaled(seed, [n_per_class; 4]);
    for c in &mut spec.classes {
        c.distortions.clear();
    }
    spec
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    /// Distorted segments longer than this are cut to their leading
    /// `window_s` seconds before feature extraction.
    pub window_s: f64,
    pub min_per_class: usize,
    pub features: FeatureConfig,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            window_s: 8.0,
            min_per_class: 10,
            features: FeatureConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub kind: SweepKind,
    pub grid: Vec<f64>,
    pub algorithms: Vec<Algorithm>,
    /// `accuracy[model][cell]`.
    pub accuracy: Vec<Vec<f64>>,
    /// Macro-averaged F1, same layout as `accuracy`.
    pub macro_f1: Vec<Vec<f64>>,
    pub n_eval_per_class: usize,
    pub master_seed: u64,
}

impl SweepResult {
    /// Long format, one row per (grid value, model):
    /// `kind,value,algorithm,accuracy,macro_f1`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut out = String::from("kind,value,algorithm,accuracy,macro_f1\n");
        for (g, v) in self.grid.iter().enumerate() {
            for (m, a) in self.algorithms.iter().enumerate() {
                out.push_str(&format!(
                    "{},{v},{a},{},{}\n",
                    self.kind, self.accuracy[m][g], self.macro_f1[m][g]
                ));
            }
        }
        w.write_all(out.as_bytes())?;
        Ok(())
    }

    pub fn to_svg(&self) -> String {
        let names: Vec<String> = self
            .algorithms
            .iter()
            .flat_map(|a| [format!("{a} accuracy"), format!("{a} macro-F1")])
            .collect();
        let series: Vec<svg::Series> = self
            .accuracy
            .iter()
            .zip(&self.macro_f1)
            .flat_map(|(acc, f1)| [acc, f1])
            .zip(&names)
            .map(|(values, name)| svg::Series { name, values })
            .collect();
        svg::line_chart(
            &format!("{} sweep ({} per class)", self.kind, self.n_eval_per_class),
            self.kind.axis_label(),
            "score",
            &self.grid,
            &series,
        )
    }
}

/// Accuracy and macro-F1 of each model on one feature matrix.
pub fn score_models(models: &[TrainedModel], x: &FeatureMatrix, y: &[ClassLabel]) -> Result<Vec<Metrics>> {
    models
        .iter()
        .map(|m| Ok(Metrics::compute(y, &m.predict_matrix(x)?)))
        .collect()
}

fn leading_window(seg: Segment, window_s: f64) -> Segment {
    let n = samples_for(window_s, seg.sample_rate_hz);
    if seg.len() <= n {
        seg
    } else {
        seg.with_samples(seg.samples[..n].to_vec())
    }
}

/// Features of every eval segment cut to the leading window, no distortion.
pub fn baseline_features(eval: &EvalSet, options: &SweepOptions) -> Result<FeatureMatrix> {
    let segs: Vec<Segment> = eval
        .segments
        .iter()
        .map(|s| leading_window(s.clone(), options.window_s))
        .collect();
    features_of(&segs, &options.features)
}

fn same_samples(a: &Segment, b: &Segment) -> bool {
    a.sample_rate_hz == b.sample_rate_hz
        && a.samples.len() == b.samples.len()
        && a.samples.iter().zip(&b.samples).all(|(x, y)| x.to_bits() == y.to_bits())
}

fn features_of(segs: &[Segment], config: &FeatureConfig) -> Result<FeatureMatrix> {
    let rows = extract_batch(segs, config).into_iter().collect::<Result<Vec<FeatureVector>>>()?;
    Ok(FeatureMatrix::from_vectors(&rows))
}

fn distort(
    kind: SweepKind,
    value: f64,
    seg: &Segment,
    carrier: Option<&Segment>,
    seed: u64,
) -> Result<Segment> {
    match kind {
        SweepKind::Horizontal => horizontal_scale(seg, value),
        SweepKind::Vertical => vertical_scale(seg, value),
        SweepKind::Awgn => {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::InvalidParameter(format!("relative sigma must be non-negative, got {value}")));
            }
            add_awgn(seg, value * std_dev(&seg.samples), seed)
        }
        SweepKind::Crop => random_crop(seg, value, seed),
        SweepKind::Superimpose => {
            let carrier = carrier.expect("carrier chosen for every segment");
            let c_std = std_dev(&carrier.samples);
            let scale = if c_std > 0.0 { std_dev(&seg.samples) / c_std } else { 0.0 };
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::InvalidParameter(format!("gain must be non-negative, got {value}")));
            }
            superimpose(seg, carrier, value * scale)
        }
    }
}

/// Scores every model on the eval set distorted at each grid value.
///
/// Segment `i` of cell `g` uses the seed `derive_seed(seed, [g, i])`.
/// Segments a cell leaves bit-identical reuse the undistorted features. For the
/// superimposition sweep the carrier of segment `i` is the NON_BIO eval
/// segment that comes after it in eval order (wrapping), so no segment is
/// mixed with itself. Cells run in parallel and are merged in grid order.
pub fn run_distortion_sweep(
    models: &[TrainedModel],
    eval: &EvalSet,
    kind: SweepKind,
    grid: &[f64],
    seed: u64,
    options: &SweepOptions,
) -> Result<SweepResult> {
    run_distortion_sweep_with_baseline(models, eval, kind, grid, seed, options, None)
}

/// As [`run_distortion_sweep`], with the undistorted features supplied.
/// `baseline` row `i` must hold the features of eval segment `i` cut to the
/// leading window (see [`baseline_features`]).
pub fn run_distortion_sweep_with_baseline(
    models: &[TrainedModel],
    eval: &EvalSet,
    kind: SweepKind,
    grid: &[f64],
    seed: u64,
    options: &SweepOptions,
    baseline: Option<&FeatureMatrix>) -> Result<SweepResult> {
    if models.is_empty() {
        return Err(Error::InvalidParameter("sweep needs at least one model".into()));
    }
    if grid.is_empty() {
        return Err(Error::InvalidParameter("sweep grid is empty".into()));
    }
    let n_per_class = eval.n_per_class();
    if n_per_class < options.min_per_class {
        return Err(Error::InsufficientSamples(format!(
            "eval set has {n_per_class} segments in its smallest class, need {}",
            options.min_per_class
        )));
    }
    for m in models {
        m.check_fingerprint(&FeatureVector::fingerprint())?;
    }

    let carriers: Vec<Option<&Segment>> = if kind == SweepKind::Superimpose {
        let audio: Vec<usize> = (0..eval.len()).filter(|&i| eval.labels[i] == ClassLabel::NonBio).collect();
        if audio.len() < 2 {
            return Err(Error::InsufficientSamples("superimposition needs two NON_BIO carriers".into()));
        }
        (0..eval.len())
            .map(|i| {
                let pick = audio.iter().copied().find(|&a| a > i).unwrap_or(audio[0]);
                Some(&eval.segments[pick])
            })
            .collect()
    } else {
        vec![None; eval.len()]
    };

    let originals: Vec<Segment> = eval
        .segments
        .iter()
        .map(|s| leading_window(s.clone(), options.window_s))
        .collect();

    // distort every cell first; `None` marks a segment left bit-identical
    let distorted: Vec<Vec<Option<Segment>>> = grid
        .par_iter()
        .enumerate()
        .map(|(g, &value)| {
            eval.segments
                .par_iter()
                .zip(&carriers)
                .zip(&originals)
                .enumerate()
                .map(|(i, ((seg, carrier), orig))| {
                    let s = derive_seed(seed, &[g as u64, i as u64]);
                    let d = leading_window(distort(kind, value, seg, *carrier, s)?, options.window_s);
                    Ok((!same_samples(&d, orig)).then_some(d))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    // features of unchanged segments are computed once and shared by all cells
    let reused: Vec<bool> = (0..eval.len())
        .map(|i| distorted.iter().any(|cell| cell[i].is_none()))
        .collect();
    let base_rows: Vec<Option<FeatureVector>> = match baseline {
        Some(b) => {
            if b.n_rows() != eval.len() || b.n_cols() != crate::features::N_FEATURES {
                return Err(Error::InvalidParameter(format!(
                    "baseline is {}x{}, eval set has {} segments",
                    b.n_rows(),
                    b.n_cols(),
                    eval.len()
                )));
            }
            (0..eval.len())
                .map(|i| {
                    reused[i].then(|| FeatureVector {
                        values: b.row(i).try_into().expect("column count checked"),
                    })
                })
                .collect()
        }
        None => {
            let idx: Vec<usize> = (0..eval.len()).filter(|&i| reused[i]).collect();
            let segs: Vec<Segment> = idx.iter().map(|&i| originals[i].clone()).collect();
            let mut rows = vec![None; eval.len()];
            for (i, fv) in idx.into_iter().zip(extract_batch(&segs, &options.features)) {
                rows[i] = Some(fv?);
            }
            rows
        }
    };

    let cells: Vec<Vec<Metrics>> = distorted
        .into_par_iter()
        .map(|cell| {
            let fresh: Vec<Segment> = cell.iter().flatten().cloned().collect();
            let mut fresh_rows = extract_batch(&fresh, &options.features).into_iter();
            let rows = cell
                .iter()
                .enumerate()
                .map(|(i, d)| match d {
                    Some(_) => fresh_rows.next().expect("one row per fresh segment"),
                    None => Ok(base_rows[i].expect("reused rows were computed")),
                })
                .collect::<Result<Vec<FeatureVector>>>()?;
            score_models(models, &FeatureMatrix::from_vectors(&rows), &eval.labels)
        })
        .collect::<Result<_>>()?;

    let per_model = |f: fn(&Metrics) -> f64| -> Vec<Vec<f64>> {
        (0..models.len())
            .map(|m| cells.iter().map(|c| f(&c[m])).collect())
            .collect()
    };
    Ok(SweepResult {
        kind,
        grid: grid.to_vec(),
        algorithms: models.iter().map(|m| m.algorithm).collect(),
        accuracy: per_model(|m| m.accuracy),
        macro_f1: per_model(|m| m.macro_f1),
        n_eval_per_class: n_per_class,
        master_seed: seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_names_round_trip() {
        for k in SweepKind::ALL {
            assert_eq!(k.as_str().parse::<SweepKind>().unwrap(), k);
            assert!(!k.default_grid().is_empty());
        }
        assert!("warp".parse::<SweepKind>().is_err());
    }

    #[test]
    fn csv_is_long_format() {
        let r = SweepResult {
            kind: SweepKind::Crop,
            grid: vec![1.0, 2.0],
            algorithms: vec![Algorithm::RandomForest, Algorithm::GbtExact],
            accuracy: vec![vec![0.5, 1.0], vec![0.25, 0.75]],
            macro_f1: vec![vec![0.4, 1.0], vec![0.2, 0.7]],
            n_eval_per_class: 10,
            master_seed: 3,
        };
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "kind,value,algorithm,accuracy,macro_f1\n\
             crop,1,rf,0.5,0.4\n\
             crop,1,gbt_exact,0.25,0.2\n\
             crop,2,rf,1,1\n\
             crop,2,gbt_exact,0.75,0.7\n"
        );
        assert_eq!(r.to_svg().matches("<polyline").count(), 4);
    }

    #[test]
    fn leading_window_only_shortens() {
        let s = Segment::new(vec![1.0; 50], 10.0, "p", 0.0);
        assert_eq!(leading_window(s.clone(), 8.0).len(), 50);
        assert_eq!(leading_window(s, 2.0).len(), 20);
    }
}
