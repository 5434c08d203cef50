//! Time-series representation, fixed-window segmentation and resampling.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Signal categories. The declaration order is the frozen class order used by
/// every model: biometric classes first, so argmax ties never favour
/// [`ClassLabel::NonBio`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClassLabel {
    #[serde(rename = "ECG")]
    Ecg,
    #[serde(rename = "EEG")]
    Eeg,
    #[serde(rename = "B_MOV")]
    BMov,
    #[serde(rename = "NON_BIO")]
    NonBio,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; 4] = [
        ClassLabel::Ecg,
        ClassLabel::Eeg,
        ClassLabel::BMov,
        ClassLabel::NonBio,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ClassLabel::Ecg => "ECG",
            ClassLabel::Eeg => "EEG",
            ClassLabel::BMov => "B_MOV",
            ClassLabel::NonBio => "NON_BIO",
        }
    }

    /// Lower-case name used for directory and file names.
    pub fn slug(self) -> &'static str {
        match self {
            ClassLabel::Ecg => "ecg",
            ClassLabel::Eeg => "eeg",
            ClassLabel::BMov => "b_mov",
            ClassLabel::NonBio => "non_bio",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_biometric(self) -> bool {
        self != ClassLabel::NonBio
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s
            .trim()
            .chars()
            .filter(|c| !matches!(c, '_' | '-' | ' '))
            .collect::<String>()
            .to_ascii_uppercase();
        match norm.as_str() {
            "ECG" => Ok(ClassLabel::Ecg),
            "EEG" => Ok(ClassLabel::Eeg),
            "BMOV" => Ok(ClassLabel::BMov),
            "NONBIO" => Ok(ClassLabel::NonBio),
            _ => Err(Error::InvalidParameter(format!("unknown class label `{s}`"))),
        }
    }
}

/// A labeled, rate-annotated one-dimensional recording.
///
/// Fields are public so that untrusted input can be represented as-is; use
/// [`Signal::new`] to construct a checked value and [`Signal::validate`]
/// before trusting one built elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    pub samples: Vec<f64>,
    pub sample_rate_hz: f64,
    pub source_id: String,
    pub label: Option<ClassLabel>,
}

impl Signal {
    pub fn new(
        samples: Vec<f64>,
        sample_rate_hz: f64,
        source_id: impl Into<String>,
        label: Option<ClassLabel>,
    ) -> Result<Self> {
        let s = Signal {
            samples,
            sample_rate_hz,
            source_id: source_id.into(),
            label,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        validate_samples(&self.samples, self.sample_rate_hz)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    /// Views the whole signal as a single segment at offset zero.
    pub fn as_segment(&self) -> Segment {
        Segment::new(self.samples.clone(), self.sample_rate_hz, &self.source_id, 0.0)
    }
}

pub(crate) fn validate_samples(samples: &[f64], sample_rate_hz: f64) -> Result<()> {
    if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
        return Err(Error::InvalidSignal(format!(
            "sample rate must be positive and finite, got {sample_rate_hz}"
        )));
    }
    if samples.is_empty() {
        return Err(Error::InvalidSignal("no samples".into()));
    }
    if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
        return Err(Error::InvalidSignal(format!(
            "sample {i} is not finite ({})",
            samples[i]
        )));
    }
    Ok(())
}

/// A contiguous window cut from a parent recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub samples: Vec<f64>,
    pub sample_rate_hz: f64,
    pub duration_s: f64,
    pub parent_id: String,
    pub offset_s: f64,
}

impl Segment {
    pub fn new(samples: Vec<f64>, sample_rate_hz: f64, parent_id: &str, offset_s: f64) -> Self {
        let duration_s = samples.len() as f64 / sample_rate_hz;
        Segment {
            samples,
            sample_rate_hz,
            duration_s,
            parent_id: parent_id.to_string(),
            offset_s,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Same parent and offset, new samples; duration follows the sample count.
    pub fn with_samples(&self, samples: Vec<f64>) -> Segment {
        Segment::new(samples, self.sample_rate_hz, &self.parent_id, self.offset_s)
    }

    pub fn to_signal(&self, label: Option<ClassLabel>) -> Signal {
        Signal {
            samples: self.samples.clone(),
            sample_rate_hz: self.sample_rate_hz,
            source_id: self.parent_id.clone(),
            label,
        }
    }
}

/// Number of samples spanning `seconds` at `rate_hz`.
pub fn samples_for(seconds: f64, rate_hz: f64) -> usize {
    (seconds * rate_hz).round().max(0.0) as usize
}

/// Cuts `signal` into non-overlapping windows of `window_s` seconds. The
/// trailing remainder shorter than one window is dropped.
pub fn segment(signal: &Signal, window_s: f64) -> Result<Vec<Segment>> {
    signal.validate()?;
    if !(window_s.is_finite() && window_s > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "window must be positive, got {window_s}"
        )));
    }
    let fs = signal.sample_rate_hz;
    let width = samples_for(window_s, fs);
    if width == 0 {
        return Err(Error::InvalidParameter(format!(
            "window of {window_s} s is shorter than one sample at {fs} Hz"
        )));
    }
    if signal.len() < width {
        return Err(Error::SignalTooShort {
            duration_s: signal.duration_s(),
            required_s: window_s,
        });
    }
    Ok(signal
        .samples
        .chunks_exact(width)
        .enumerate()
        .map(|(k, chunk)| {
            Segment::new(
                chunk.to_vec(),
                fs,
                &signal.source_id,
                (k * width) as f64 / fs,
            )
        })
        .collect())
}

/// Linear interpolation at fractional index `pos`, clamped to the ends.
pub(crate) fn interpolate(samples: &[f64], pos: f64) -> f64 {
    let last = samples.len() - 1;
    if pos <= 0.0 {
        return samples[0];
    }
    let i = pos.floor() as usize;
    if i >= last {
        return samples[last];
    }
    let frac = pos - i as f64;
    if frac == 0.0 {
        samples[i]
    } else {
        samples[i] + (samples[i + 1] - samples[i]) * frac
    }
}

pub(crate) fn resample_samples(samples: &[f64], source_hz: f64, target_hz: f64) -> Vec<f64> {
    if source_hz == target_hz {
        return samples.to_vec();
    }
    let out_len = ((samples.len() as f64 * target_hz / source_hz).round() as usize).max(1);
    let step = source_hz / target_hz;
    (0..out_len)
        .map(|i| interpolate(samples, i as f64 * step))
        .collect()
}

/// Linear-interpolation resampling to `target_hz`.
pub fn resample(signal: &Signal, target_hz: f64) -> Result<Signal> {
    signal.validate()?;
    if !(target_hz.is_finite() && target_hz > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "target rate must be positive, got {target_hz}"
        )));
    }
    Ok(Signal {
        samples: resample_samples(&signal.samples, signal.sample_rate_hz, target_hz),
        sample_rate_hz: target_hz,
        source_id: signal.source_id.clone(),
        label: signal.label,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ramp(n: usize, fs: f64) -> Signal {
        Signal::new((0..n).map(|i| i as f64).collect(), fs, "ramp", None).unwrap()
    }

    #[test]
    fn twenty_seconds_at_100hz_gives_two_windows() {
        let segs = segment(&ramp(2000, 100.0), 8.0).unwrap();
        assert_eq!(segs.len(), 2);
        assert!(segs.iter().all(|s| s.len() == 800));
        assert_eq!(segs[1].offset_s, 8.0);
        assert_eq!(segs[1].samples[0], 800.0);
    }

    #[test]
    fn exact_fit_gives_one_window() {
        let segs = segment(&ramp(4000, 500.0), 8.0).unwrap();
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].len(), 4000);
        assert_eq!(segs[0].duration_s, 8.0);
    }

    #[test]
    fn short_signal_is_rejected() {
        let err = segment(&ramp(790, 100.0), 8.0).unwrap_err();
        assert!(matches!(err, Error::SignalTooShort { .. }));
    }

    #[test]
    fn invalid_signals_are_rejected() {
        assert!(Signal::new(vec![], 100.0, "x", None).is_err());
        assert!(Signal::new(vec![1.0], 0.0, "x", None).is_err());
        assert!(Signal::new(vec![1.0, f64::NAN], 100.0, "x", None).is_err());
        assert!(Signal::new(vec![f64::INFINITY], 100.0, "x", None).is_err());
    }

    #[test]
    fn audio_downsample_scales_length() {
        let s = Signal::new(vec![0.0; 44_100 * 2], 44_100.0, "a", None).unwrap();
        let r = resample(&s, 1000.0).unwrap();
        assert_eq!(r.len(), 2000);
        assert_eq!(r.sample_rate_hz, 1000.0);
    }

    #[test]
    fn resample_to_own_rate_is_identity() {
        let s = Signal::new(vec![0.3, -1.7, 2.5, 9.0], 250.0, "a", None).unwrap();
        assert_eq!(resample(&s, 250.0).unwrap(), s);
    }

    #[test]
    fn ramp_upsample_matches_closed_form() {
        let n = 100;
        let r = resample(&ramp(n, 100.0), 200.0).unwrap();
        assert_eq!(r.len(), 2 * n);
        for (i, &v) in r.samples.iter().enumerate() {
            // x(t) = 100·t, clamped to the last input sample
            let expect = (i as f64 * 0.5).min((n - 1) as f64);
            assert!((v - expect).abs() < 1e-12, "i={i}: {v} vs {expect}");
        }
    }

    #[test]
    fn labels_parse_loosely() {
        assert_eq!("b-mov".parse::<ClassLabel>().unwrap(), ClassLabel::BMov);
        assert_eq!("NON_BIO".parse::<ClassLabel>().unwrap(), ClassLabel::NonBio);
        assert_eq!("ecg".parse::<ClassLabel>().unwrap(), ClassLabel::Ecg);
        assert!("emg".parse::<ClassLabel>().is_err());
        assert!(ClassLabel::ALL.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(ClassLabel::ALL.iter().filter(|c| !c.is_biometric()).count(), 1);
    }

    proptest! {
        #[test]
        fn segments_concatenate_to_prefix(
            xs in prop::collection::vec(-1e3f64..1e3, 10..400),
            width in 1usize..10,
        ) {
            let s = Signal::new(xs.clone(), 10.0, "p", None).unwrap();
            let segs = segment(&s, width as f64 / 10.0).unwrap();
            prop_assert_eq!(segs.len(), xs.len() / width);
            let joined: Vec<f64> = segs.iter().flat_map(|g| g.samples.iter().copied()).collect();
            prop_assert_eq!(&joined[..], &xs[..joined.len()]);
            for w in segs.windows(2) {
                prop_assert!(w[0].offset_s + w[0].duration_s - w[1].offset_s < 1e-9);
            }
        }
    }
}
