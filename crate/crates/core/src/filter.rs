//! Fail-closed gate: a signal passes only when the classifier's most
//! probable class is NON_BIO and every step before that succeeded.

use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{argmax, TrainedModel};
use crate::error::{Error, Result};
use crate::features::{extract_from_samples, FeatureConfig, FeatureVector};
use crate::signal::{samples_for, ClassLabel, Signal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BlockReason {
    BiometricClass,
    TooShort,
    FeatureError,
    /// Strict mode only: NON_BIO won but below the configured probability.
    LowConfidence,
    None,
}

impl BlockReason {
    pub fn as_str(self) -> &'static str {
        match self {
            BlockReason::BiometricClass => "BIOMETRIC_CLASS",
            BlockReason::TooShort => "TOO_SHORT",
            BlockReason::FeatureError => "FEATURE_ERROR",
            BlockReason::LowConfidence => "LOW_CONFIDENCE",
            BlockReason::None => "NONE",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    /// Minimum duration; longer signals are classified on their leading
    /// `t_star_s` seconds.
    pub t_star_s: f64,
    /// Strict mode: also require P(NON_BIO) >= this value.
    pub strict_min_probability: Option<f64>,
    pub features: FeatureConfig,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            t_star_s: 8.0,
            strict_min_probability: None,
            features: FeatureConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FilterVerdict {
    pub source_id: String,
    pub class: Option<ClassLabel>,
    pub max_probability: f64,
    pub allowed_to_pass: bool,
    pub block_reason: BlockReason,
}

impl FilterVerdict {
    pub fn blocked(source_id: &str, reason: BlockReason) -> Self {
        FilterVerdict {
            source_id: source_id.to_string(),
            class: None,
            max_probability: 0.0,
            allowed_to_pass: false,
            block_reason: reason,
        }
    }
}

/// A loaded model plus gate settings. Immutable, so one instance can serve
/// many threads.
#[derive(Debug, Clone)]
pub struct PrivacyFilter {
    model: TrainedModel,
    config: FilterConfig,
}

#[derive(Debug, Clone, Default)]
pub struct GateOutput {
    /// One verdict per input, in input order.
    pub verdicts: Vec<FilterVerdict>,
    /// The inputs that were allowed through, in input order.
    pub passed: Vec<Signal>,
}

impl PrivacyFilter {
    pub fn new(model: TrainedModel, config: FilterConfig) -> Result<Self> {
        model.check_fingerprint(&FeatureVector::fingerprint())?;
        if !(config.t_star_s.is_finite() && config.t_star_s > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "t_star_s must be positive, got {}",
                config.t_star_s
            )));
        }
        if let Some(p) = config.strict_min_probability {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameter(format!(
                    "strict_min_probability must lie in [0, 1], got {p}"
                )));
            }
        }
        Ok(PrivacyFilter { model, config })
    }

    pub fn model(&self) -> &TrainedModel {
        &self.model
    }

    pub fn config(&self) -> &FilterConfig {
        &self.config
    }

    pub fn classify_and_gate(&self, signal: &Signal) -> FilterVerdict {
        let id = &signal.source_id;
        let rate = signal.sample_rate_hz;
        if !(rate.is_finite() && rate > 0.0) {
            return FilterVerdict::blocked(id, BlockReason::FeatureError);
        }
        let needed = samples_for(self.config.t_star_s, rate).max(1);
        // duration >= t* enters classification
        if signal.samples.len() < needed {
            return FilterVerdict::blocked(id, BlockReason::TooShort);
        }
        if signal.samples.iter().any(|v| !v.is_finite()) {
            return FilterVerdict::blocked(id, BlockReason::FeatureError);
        }
        let window = &signal.samples[..needed];
        let probs = catch_unwind(AssertUnwindSafe(|| {
            extract_from_samples(window, rate, &self.config.features)
                .map(|fv| self.model.predict_proba_row(&fv.values))
        }));
        let probs = match probs {
            Ok(Ok(p)) if p.len() == self.model.classes.len() && p.iter().all(|v| v.is_finite()) => p,
            _ => return FilterVerdict::blocked(id, BlockReason::FeatureError),
        };
        let best = argmax(&probs);
        let class = self.model.classes[best];
        let max_probability = probs[best];
        let block_reason = if class != ClassLabel::NonBio {
            BlockReason::BiometricClass
        } else if self
            .config
            .strict_min_probability
            .is_some_and(|tau| max_probability < tau)
        {
            BlockReason::LowConfidence
        } else {
            BlockReason::None
        };
        FilterVerdict {
            source_id: id.clone(),
            class: Some(class),
            max_probability,
            allowed_to_pass: block_reason == BlockReason::None,
            block_reason,
        }
    }

    /// Gates each signal independently; a bad item only blocks itself.
    pub fn gate_stream<I: IntoIterator<Item = Signal>>(&self, signals: I) -> GateOutput {
        let signals: Vec<Signal> = signals.into_iter().collect();
        let verdicts: Vec<FilterVerdict> = signals
            .par_iter()
            .map(|s| self.classify_and_gate(s))
            .collect();
        let passed = signals
            .into_iter()
            .zip(&verdicts)
            .filter(|(_, v)| v.allowed_to_pass)
            .map(|(s, _)| s)
            .collect();
        GateOutput { verdicts, passed }
    }
}

pub fn classify_and_gate(signal: &Signal, model: &TrainedModel, config: &FilterConfig) -> Result<FilterVerdict> {
    Ok(PrivacyFilter::new(model.clone(), *config)?.classify_and_gate(signal))
}

/// Verdict log: `source_id,class,max_probability,allowed_to_pass,block_reason`.
pub fn write_verdicts<W: Write>(w: W, verdicts: &[FilterVerdict]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    out.write_record(["source_id", "class", "max_probability", "allowed_to_pass", "block_reason"])
        .map_err(io)?;
    for v in verdicts {
        out.write_record([
            v.source_id.as_str(),
            v.class.map_or("NONE", |c| c.as_str()),
            &v.max_probability.to_string(),
            if v.allowed_to_pass { "true" } else { "false" },
            v.block_reason.as_str(),
        ])
        .map_err(io)?;
    }
    out.flush()?;
    Ok(())
}
