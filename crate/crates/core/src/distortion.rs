//! Seeded signal distortions used for robustness evaluation.
//!
//! | kind        | transform                         |
//! |-------------|-----------------------------------|
//! | horizontal  | `z(t) = s(alpha * t)`             |
//! | vertical    | `z(t) = alpha * s(t)`             |
//! | AWGN        | `z(t) = s(t) + N(0, sigma)`       |
//! | crop        | random contiguous `T`-second window |
//! | superimpose | `z(t) = s(t) + gain * c(t)`       |
//!
//! Each transform returns the input samples unchanged, bit for bit, at its
//! identity parameter.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{interpolate, resample_samples, samples_for, Segment};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistortionKind {
    HorizontalScale { alpha: f64 },
    VerticalScale { alpha: f64 },
    Awgn { sigma: f64 },
    Crop { duration_s: f64 },
    Superimpose { carrier_id: String, gain: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionSpec {
    #[serde(flatten)]
    pub kind: DistortionKind,
    pub seed: u64,
}

impl DistortionSpec {
    /// Applies the distortion. `carrier` is required for superimposition and
    /// ignored otherwise.
    pub fn apply(&self, segment: &Segment, carrier: Option<&Segment>) -> Result<Segment> {
        match &self.kind {
            DistortionKind::HorizontalScale { alpha } => horizontal_scale(segment, *alpha),
            DistortionKind::VerticalScale { alpha } => vertical_scale(segment, *alpha),
            DistortionKind::Awgn { sigma } => add_awgn(segment, *sigma, self.seed),
            DistortionKind::Crop { duration_s } => random_crop(segment, *duration_s, self.seed),
            DistortionKind::Superimpose { carrier_id, gain } => {
                let carrier = carrier.ok_or_else(|| {
                    Error::InvalidParameter(format!("carrier `{carrier_id}` not supplied"))
                })?;
                superimpose(segment, carrier, *gain)
            }
        }
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
    }
}

/// Time-axis scaling by resampling: output sample `i` is the input
/// interpolated at `t = i * alpha / fs`. Duration becomes `duration / alpha`;
/// the sample rate is kept.
pub fn horizontal_scale(segment: &Segment, alpha: f64) -> Result<Segment> {
    check_positive("alpha", alpha)?;
    if alpha == 1.0 {
        return Ok(segment.clone());
    }
    let out_len = (segment.len() as f64 / alpha).round() as usize;
    if out_len == 0 || segment.is_empty() {
        return Err(Error::OutputTooShort(format!(
            "alpha {alpha} leaves no samples from {}",
            segment.len()
        )));
    }
    let samples = (0..out_len)
        .map(|i| interpolate(&segment.samples, i as f64 * alpha))
        .collect();
    Ok(segment.with_samples(samples))
}

pub fn vertical_scale(segment: &Segment, alpha: f64) -> Result<Segment> {
    check_positive("alpha", alpha)?;
    Ok(segment.with_samples(segment.samples.iter().map(|x| x * alpha).collect()))
}

/// Adds i.i.d. Gaussian noise with standard deviation `sigma` from the
/// ChaCha8 stream keyed by `seed`.
pub fn add_awgn(segment: &Segment, sigma: f64, seed: u64) -> Result<Segment> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sigma must be non-negative, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(segment.clone());
    }
    let mut rng = crate::rng::stream(seed, &[]);
    let samples = segment
        .samples
        .iter()
        .map(|x| {
            let z: f64 = StandardNormal.sample(&mut rng);
            x + sigma * z
        })
        .collect();
    Ok(segment.with_samples(samples))
}

/// Random contiguous window of `duration_s` seconds. The start is drawn
/// uniformly over every admissible sample offset.
pub fn random_crop(segment: &Segment, duration_s: f64, seed: u64) -> Result<Segment> {
    check_positive("crop duration", duration_s)?;
    let fs = segment.sample_rate_hz;
    let n_out = samples_for(duration_s, fs);
    if n_out > segment.len() {
        return Err(Error::CropLongerThanSignal {
            crop_s: duration_s,
            duration_s: segment.duration_s,
        });
    }
    if n_out == 0 {
        return Err(Error::OutputTooShort(format!(
            "crop of {duration_s} s is under one sample at {fs} Hz"
        )));
    }
    let max_start = segment.len() - n_out;
    let start = if max_start == 0 {
        0
    } else {
        let mut rng = crate::rng::stream(seed, &[]);
        let u: f64 = rng.random();
        ((u * (max_start + 1) as f64).floor() as usize).min(max_start)
    };
    Ok(Segment::new(
        segment.samples[start..start + n_out].to_vec(),
        fs,
        &segment.parent_id,
        segment.offset_s + start as f64 / fs,
    ))
}

/// `segment + gain * carrier`, with the carrier resampled to the segment's
/// rate first if needed.
pub fn superimpose(segment: &Segment, carrier: &Segment, gain: f64) -> Result<Segment> {
    if !(gain.is_finite() && gain >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "gain must be non-negative, got {gain}"
        )));
    }
    let resampled;
    let carrier_samples: &[f64] = if carrier.sample_rate_hz == segment.sample_rate_hz {
        &carrier.samples
    } else {
        resampled = resample_samples(&carrier.samples, carrier.sample_rate_hz, segment.sample_rate_hz);
        &resampled
    };
    if carrier_samples.len() < segment.len() {
        return Err(Error::CarrierTooShort {
            carrier: carrier_samples.len(),
            required: segment.len(),
        });
    }
    if gain == 0.0 {
        return Ok(segment.clone());
    }
    Ok(segment.with_samples(
        segment
            .samples
            .iter()
            .zip(carrier_samples)
            .map(|(s, c)| s + gain * c)
            .collect(),
    ))
}
