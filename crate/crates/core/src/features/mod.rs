//! The 12-entry feature vector: fuzzy entropy at embedding dimensions 1 to 10,
//! then the mean and standard deviation of the Welch PSD.

pub mod fuzzy;
pub mod table;
pub mod welch;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::signal::{validate_samples, Segment};

pub use fuzzy::{fuzzy_entropy, fuzzy_entropy_profile, FuzzyEnParams, Tolerance};
pub use table::{FeatureRow, FeatureTable};
pub use welch::{welch_psd, PsdEstimate, WelchConfig};

pub const N_FEATURES: usize = 12;
pub const MAX_EMBEDDING_DIM: usize = 10;

/// Frozen feature order. Models record a fingerprint of this list.
pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "fuzzyen_m1",
    "fuzzyen_m2",
    "fuzzyen_m3",
    "fuzzyen_m4",
    "fuzzyen_m5",
    "fuzzyen_m6",
    "fuzzyen_m7",
    "fuzzyen_m8",
    "fuzzyen_m9",
    "fuzzyen_m10",
    "psd_mean",
    "psd_std",
];

pub const PSD_MEAN: usize = 10;
pub const PSD_STD: usize = 11;

/// Short stable digest of an ordered list of feature names.
pub fn fingerprint<S: AsRef<str>>(names: &[S]) -> String {
    let joined = names.iter().map(|s| s.as_ref()).collect::<Vec<_>>().join(",");
    Sha256::digest(joined.as_bytes())[..8]
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn feature_names() -> Vec<String> {
    FEATURE_NAMES.iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub tolerance: Tolerance,
    pub fuzziness: f64,
    pub welch: WelchConfig,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            tolerance: Tolerance::default(),
            fuzziness: 2.0,
            welch: WelchConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector {
    pub values: [f64; N_FEATURES],
}

impl FeatureVector {
    pub fn feature_names(&self) -> &'static [&'static str; N_FEATURES] {
        &FEATURE_NAMES
    }

    pub fn fingerprint() -> String {
        fingerprint(&FEATURE_NAMES)
    }
}

pub fn extract_features(segment: &Segment, config: &FeatureConfig) -> Result<FeatureVector> {
    extract_from_samples(&segment.samples, segment.sample_rate_hz, config)
}

pub fn extract_from_samples(
    samples: &[f64],
    sample_rate_hz: f64,
    config: &FeatureConfig,
) -> Result<FeatureVector> {
    validate_samples(samples, sample_rate_hz)?;
    let entropy =
        fuzzy_entropy_profile(samples, MAX_EMBEDDING_DIM, config.tolerance, config.fuzziness)?;
    let psd = welch_psd(samples, sample_rate_hz, &config.welch)?;
    let (mean, std) = psd.stats_without_dc();

    let mut values = [0.0; N_FEATURES];
    values[..MAX_EMBEDDING_DIM].copy_from_slice(&entropy);
    values[PSD_MEAN] = mean;
    values[PSD_STD] = std;
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::FeatureNotFinite {
            name: FEATURE_NAMES[i].to_string(),
            value: values[i],
        });
    }
    Ok(FeatureVector { values })
}

/// Extracts every segment in parallel; results keep input order.
pub fn extract_batch(segments: &[Segment], config: &FeatureConfig) -> Vec<Result<FeatureVector>> {
    segments
        .par_iter()
        .map(|s| extract_features(s, config))
        .collect()
}

/// Row-major feature matrix with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    names: Vec<String>,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(names: Vec<String>) -> Self {
        FeatureMatrix {
            names,
            data: Vec::new(),
        }
    }

    pub fn from_rows<R: AsRef<[f64]>>(names: Vec<String>, rows: &[R]) -> Result<Self> {
        let mut m = FeatureMatrix::new(names);
        for r in rows {
            m.push_row(r.as_ref())?;
        }
        Ok(m)
    }

    pub fn from_vectors(vectors: &[FeatureVector]) -> Self {
        let mut m = FeatureMatrix::new(feature_names());
        for v in vectors {
            m.data.extend_from_slice(&v.values);
        }
        m
    }

    pub fn push_row(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.n_cols() {
            return Err(Error::InvalidParameter(format!(
                "row has {} values, matrix has {} columns",
                row.len(),
                self.n_cols()
            )));
        }
        self.data.extend_from_slice(row);
        Ok(())
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn fingerprint(&self) -> String {
        fingerprint(&self.names)
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn n_rows(&self) -> usize {
        if self.names.is_empty() {
            0
        } else {
            self.data.len() / self.names.len()
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.n_cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n_cols() + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        let c = self.n_cols();
        self.data[row * c + col] = value;
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n_cols().max(1))
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        self.rows().map(|r| r[col]).collect()
    }

    /// Keeps the given columns in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> FeatureMatrix {
        let names = cols.iter().map(|&c| self.names[c].clone()).collect();
        let mut data = Vec::with_capacity(self.n_rows() * cols.len());
        for r in self.rows() {
            data.extend(cols.iter().map(|&c| r[c]));
        }
        FeatureMatrix { names, data }
    }

    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(rows.len() * self.n_cols());
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        FeatureMatrix {
            names: self.names.clone(),
            data,
        }
    }

    pub fn check_finite(&self) -> Result<()> {
        let c = self.n_cols().max(1);
        match self.data.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(Error::NonFiniteFeature { row: i / c, col: i % c }),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::Segment;

    #[test]
    fn constant_segment_features() {
        let seg = Segment::new(vec![2.5; 800], 100.0, "c", 0.0);
        let fv = extract_features(&seg, &FeatureConfig::default()).unwrap();
        assert!(fv.values[..10].iter().all(|&v| v == 0.0));
        assert_eq!(fv.values[PSD_STD], 0.0);
        assert_eq!(fv.values[PSD_MEAN], 0.0);
    }

    #[test]
    fn extraction_is_deterministic_across_thread_counts() {
        let xs: Vec<f64> = (0..600).map(|i| ((i * 37 % 101) as f64).sin()).collect();
        let seg = Segment::new(xs, 100.0, "d", 0.0);
        let cfg = FeatureConfig::default();
        let a = extract_features(&seg, &cfg).unwrap();
        let b = extract_features(&seg, &cfg).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let c = pool.install(|| extract_features(&seg, &cfg).unwrap());
        let bits = |v: &FeatureVector| v.values.map(f64::to_bits);
        assert_eq!(bits(&a), bits(&b));
        assert_eq!(bits(&a), bits(&c));
    }

    #[test]
    fn non_finite_and_short_inputs_fail() {
        let cfg = FeatureConfig::default();
        let mut xs = vec![0.5; 200];
        xs[10] = f64::NAN;
        assert!(extract_features(&Segment::new(xs, 100.0, "n", 0.0), &cfg).is_err());
        let short = Segment::new(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 11.0], 100.0, "s", 0.0);
        assert!(matches!(
            extract_features(&short, &cfg),
            Err(Error::SegmentTooShort { .. })
        ));
    }

    #[test]
    fn fingerprint_tracks_order() {
        let a = fingerprint(&FEATURE_NAMES);
        let mut swapped = FEATURE_NAMES;
        swapped.swap(0, 1);
        assert_ne!(a, fingerprint(&swapped));
        assert_eq!(a, FeatureMatrix::new(feature_names()).fingerprint());
        assert_eq!(a.len(), 16);
    }

    #[test]
    fn matrix_selection() {
        let m = FeatureMatrix::from_rows(
            vec!["a".into(), "b".into(), "c".into()],
            &[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]],
        )
        .unwrap();
        let s = m.select_columns(&[2, 0]);
        assert_eq!(s.names(), &["c".to_string(), "a".to_string()]);
        assert_eq!(s.row(1), &[6.0, 4.0]);
        assert_eq!(m.select_rows(&[1, 1]).row(1), &[4.0, 5.0, 6.0]);
        assert_eq!(m.column(1), vec![2.0, 5.0]);
    }
}
