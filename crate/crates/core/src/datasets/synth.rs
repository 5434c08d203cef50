//! Seeded stand-ins for the four signal classes.
//!
//! These are not physiological models; they reproduce the coarse spectral and
//! regularity structure of each class so the full pipeline can be exercised
//! without the original recordings. Amplitudes are in class-typical units
//! (ECG in mV, EEG in uV, sway in mm, audio in full-scale) with a per-recording
//! log-uniform gain, so raw power alone does not identify the class.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::features::fuzzy::std_dev;
use crate::signal::{ClassLabel, Signal};

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

/// Generates `duration_s` seconds of class `label` at `sample_rate_hz`.
pub fn synth_signal(label: ClassLabel, duration_s: f64, sample_rate_hz: f64, seed: u64) -> Result<Signal> {
    if !(duration_s.is_finite() && duration_s > 0.0 && sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "duration and rate must be positive, got {duration_s} s at {sample_rate_hz} Hz"
        )));
    }
    let n = crate::signal::samples_for(duration_s, sample_rate_hz).max(1);
    let mut rng = crate::rng::stream(seed, &[label.index() as u64]);
    let samples = match label {
        ClassLabel::Ecg => ecg(&mut rng, n, sample_rate_hz),
        ClassLabel::Eeg => eeg(&mut rng, n, sample_rate_hz),
        ClassLabel::BMov => body_sway(&mut rng, n, sample_rate_hz),
        ClassLabel::NonBio => audio(&mut rng, n, sample_rate_hz),
    };
    Signal::new(
        samples,
        sample_rate_hz,
        format!("synth-{}-{seed:016x}", label.slug()),
        Some(label),
    )
}

/// Gaussian-pulse beat train at 60-100 bpm with small RR jitter, P/QRS/T
/// waves of per-recording morphology, 0.2 Hz baseline wander, measurement
/// noise of varying level and, on some recordings, mains pickup.
fn ecg(rng: &mut ChaCha8Rng, n: usize, fs: f64) -> Vec<f64> {
    let bpm = rng.random_range(60.0..100.0);
    let rr = 60.0 / bpm;
    let gain = log_uniform(rng, 0.4, 2.5);
    let qrs_w = rng.random_range(0.7..1.6);
    // (amplitude, offset from R peak in s, width in s)
    let waves = [
        (rng.random_range(0.05..0.2), -0.20, 0.025),
        (-rng.random_range(0.0..0.2), -0.035, 0.010 * qrs_w),
        (1.0, 0.0, 0.012 * qrs_w),
        (-rng.random_range(0.05..0.4), 0.035, 0.010 * qrs_w),
        (rng.random_range(0.1..0.5), rng.random_range(0.22..0.32), rng.random_range(0.035..0.06)),
    ];
    let duration = n as f64 / fs;
    let mut out = vec![0.0; n];
    let mut beat = -rng.random_range(0.0..rr);
    while beat < duration + 0.5 {
        let amp = 1.0 + 0.05 * gauss(rng);
        for &(a, off, w) in &waves {
            let centre = beat + off;
            let lo = (((centre - 5.0 * w) * fs).floor().max(0.0)) as usize;
            let hi = (((centre + 5.0 * w) * fs).ceil().max(0.0) as usize).min(n);
            for (i, o) in out.iter_mut().enumerate().take(hi).skip(lo) {
                let t = i as f64 / fs - centre;
                *o += amp * a * (-0.5 * (t / w).powi(2)).exp();
            }
        }
        beat += rr * (1.0 + 0.03 * gauss(rng));
    }
    let wander_amp = rng.random_range(0.05..0.3);
    let phase = rng.random_range(0.0..2.0 * PI);
    let noise = log_uniform(rng, 0.005, 0.08);
    let (mains_hz, mains_amp) = if rng.random_bool(0.3) {
        (if rng.random_bool(0.5) { 50.0 } else { 60.0 }, rng.random_range(0.01..0.08))
    } else {
        (0.0, 0.0)
    };
    let mains_phase = rng.random_range(0.0..2.0 * PI);
    for (i, o) in out.iter_mut().enumerate() {
        let t = i as f64 / fs;
        let hum = mains_amp * (2.0 * PI * mains_hz * t + mains_phase).sin();
        *o = gain * (*o + wander_amp * (2.0 * PI * 0.2 * t + phase).sin() + hum + noise * gauss(rng));
    }
    out
}

/// Spectrally shaped Gaussian noise with power density `~ 1 / f^exponent`,
/// zero mean, unit variance.
fn power_law_noise(rng: &mut ChaCha8Rng, n: usize, fs: f64, exponent: f64) -> Vec<f64> {
    let mut buf: Vec<Complex<f64>> = (0..n).map(|_| Complex::new(gauss(rng), 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, b) in buf.iter_mut().enumerate() {
        let bin = k.min(n - k);
        if bin == 0 {
            *b = Complex::new(0.0, 0.0);
        } else {
            let f = bin as f64 * fs / n as f64;
            *b *= f.powf(-exponent / 2.0);
        }
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let mut out: Vec<f64> = buf.iter().map(|c| c.re).collect();
    let sd = std_dev(&out);
    if sd > 0.0 {
        out.iter_mut().for_each(|x| *x /= sd);
    }
    out
}

/// 1/f-type background (spectral slope 1-2) plus 8-12 Hz alpha bursts of
/// per-recording strength, occasional blink artifacts and electrode noise.
fn eeg(rng: &mut ChaCha8Rng, n: usize, fs: f64) -> Vec<f64> {
    let gain = log_uniform(rng, 6.0, 40.0);
    let slope = rng.random_range(1.0..2.0);
    let mut out = power_law_noise(rng, n, fs, slope);
    let alpha_hz = rng.random_range(8.0..12.0);
    let alpha_amp = rng.random_range(0.2..1.5);
    let duration = n as f64 / fs;
    let mut t0 = rng.random_range(0.0..1.5);
    while t0 < duration {
        let len = rng.random_range(0.5..2.0);
        let phase = rng.random_range(0.0..2.0 * PI);
        let lo = (t0 * fs) as usize;
        let hi = (((t0 + len) * fs) as usize).min(n);
        for (i, o) in out.iter_mut().enumerate().take(hi).skip(lo) {
            let t = i as f64 / fs;
            let env = (PI * (t - t0) / len).sin().powi(2);
            *o += alpha_amp * env * (2.0 * PI * alpha_hz * t + phase).sin();
        }
        t0 += len + rng.random_range(0.3..2.5);
    }
    let blink_rate = rng.random_range(0.0..0.4);
    if blink_rate > 0.0 {
        let mut t = rng.random_range(0.0..1.0 / blink_rate);
        while t < duration {
            let amp = rng.random_range(2.0..6.0);
            let w = rng.random_range(0.05..0.12);
            let lo = (((t - 5.0 * w) * fs).max(0.0)) as usize;
            let hi = (((t + 5.0 * w) * fs) as usize).min(n);
            for (i, o) in out.iter_mut().enumerate().take(hi).skip(lo) {
                let dt = i as f64 / fs - t;
                *o += amp * (-0.5 * (dt / w).powi(2)).exp();
            }
            t += rng.random_range(0.5..2.0) / blink_rate;
        }
    }
    let noise = rng.random_range(0.05..0.4);
    for o in out.iter_mut() {
        *o = gain * (*o + noise * gauss(rng));
    }
    out
}

/// Low-pass (1 Hz) Gaussian noise integrated twice through leaky
/// integrators (corner 0.1-0.4 Hz per recording): a smooth, slowly wandering
/// postural trace with a little sensor noise.
fn body_sway(rng: &mut ChaCha8Rng, n: usize, fs: f64) -> Vec<f64> {
    let gain = log_uniform(rng, 1.0, 15.0);
    let lp = 1.0 - (-2.0 * PI * 1.0 / fs).exp();
    let leak = (-2.0 * PI * rng.random_range(0.1..0.4) / fs).exp();
    let burn_in = (20.0 * fs) as usize;
    let (mut y, mut v, mut p) = (0.0, 0.0, 0.0);
    let mut out = Vec::with_capacity(n);
    for i in 0..burn_in + n {
        y += lp * (gauss(rng) - y);
        v = leak * v + y / fs;
        p = leak * p + v / fs;
        if i >= burn_in {
            out.push(p);
        }
    }
    let mean = out.iter().sum::<f64>() / n as f64;
    let sd = std_dev(&out);
    let scale = if sd > 0.0 { gain / sd } else { gain };
    let sensor = log_uniform(rng, 0.002, 0.05);
    out.iter_mut()
        .map(|x| (*x - mean) * scale + sensor * gain * gauss(rng))
        .collect()
}

/// One to three voices of harmonic-stack notes (3-6 partials, fundamentals
/// 100-400 Hz around a per-recording register) with attack/decay envelopes,
/// plus transient clicks and a noise floor.
fn audio(rng: &mut ChaCha8Rng, n: usize, fs: f64) -> Vec<f64> {
    let gain = log_uniform(rng, 0.05, 0.8);
    let partials = rng.random_range(3..=6);
    let rolloff = rng.random_range(0.5..2.0);
    let weights: Vec<f64> = (1..=partials)
        .map(|k| rng.random_range(0.5..1.0) / (k as f64).powf(rolloff))
        .collect();
    let register = log_uniform(rng, 100.0, 400.0);
    let voices = rng.random_range(1..=3);
    let nyquist_guard = 0.45 * fs;
    let duration = n as f64 / fs;
    let mut out = vec![0.0; n];

    for voice in 0..voices {
        let level = if voice == 0 { 1.0 } else { rng.random_range(0.3..0.8) };
        let mut start = 0.0;
        while start < duration {
            let len = rng.random_range(0.15..0.6);
            let f0 = (register * 2f64.powf(rng.random_range(-1.0..1.0))).clamp(100.0, 400.0);
            let decay = rng.random_range(0.1..0.5);
            let vel = level * rng.random_range(0.5..1.0);
            let phases: Vec<f64> = (0..partials).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
            let lo = (start * fs) as usize;
            let hi = (((start + len) * fs) as usize).min(n);
            for (i, o) in out.iter_mut().enumerate().take(hi).skip(lo) {
                let t = i as f64 / fs - start;
                let env = vel * (t / 0.01).min(1.0) * (-t / decay).exp();
                let mut v = 0.0;
                for (k, (&w, &ph)) in weights.iter().zip(&phases).enumerate() {
                    let f = f0 * (k + 1) as f64;
                    if f < nyquist_guard {
                        v += w * (2.0 * PI * f * t + ph).sin();
                    }
                }
                *o += env * v;
            }
            start += len;
        }
    }

    // clicks: 5 ms decaying noise bursts at a per-recording rate
    let click_rate = rng.random_range(0.2..4.0);
    let mut t = rng.random_range(0.0..1.0 / click_rate);
    while t < duration {
        let amp = rng.random_range(0.3..1.0);
        let lo = (t * fs) as usize;
        let hi = (lo + (0.005 * fs).ceil() as usize + 1).min(n);
        for (i, o) in out.iter_mut().enumerate().take(hi).skip(lo) {
            let dt = (i - lo) as f64 / fs;
            *o += amp * (-dt / 0.0015).exp() * gauss(rng);
        }
        t += rng.random_range(0.2..1.8) / click_rate;
    }

    let floor = log_uniform(rng, 0.002, 0.05);
    out.iter_mut()
        .map(|x| gain * (*x + floor * gauss(rng)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::welch::{welch_psd, WelchConfig};

    fn autocorr_peak_lag(xs: &[f64], fs: f64, min_s: f64, max_s: f64) -> f64 {
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let c: Vec<f64> = xs.iter().map(|x| x - mean).collect();
        let lo = (min_s * fs) as usize;
        let hi = (max_s * fs) as usize;
        let (best, _) = (lo..=hi)
            .map(|lag| {
                let r: f64 = (0..n - lag).map(|i| c[i] * c[i + lag]).sum::<f64>() / (n - lag) as f64;
                (lag, r)
            })
            .fold((lo, f64::MIN), |b, x| if x.1 > b.1 { x } else { b });
        best as f64 / fs
    }

    #[test]
    fn ecg_has_cardiac_periodicity() {
        for seed in 0..5 {
            let s = synth_signal(ClassLabel::Ecg, 8.0, 500.0, seed).unwrap();
            let lag = autocorr_peak_lag(&s.samples, 500.0, 0.3, 1.5);
            assert!((0.6..=1.0).contains(&lag), "seed {seed}: lag {lag}");
        }
    }

    #[test]
    fn sway_power_sits_below_two_hz() {
        for seed in 0..5 {
            let s = synth_signal(ClassLabel::BMov, 8.0, 1000.0, seed).unwrap();
            let cfg = WelchConfig { window_s: 4.0, overlap_frac: 0.5 };
            let psd = welch_psd(&s.samples, 1000.0, &cfg).unwrap();
            let total: f64 = psd.power.iter().sum();
            let low: f64 = psd
                .frequencies_hz
                .iter()
                .zip(&psd.power)
                .filter(|(f, _)| **f < 2.0)
                .map(|(_, p)| p)
                .sum();
            assert!(low / total >= 0.95, "seed {seed}: {}", low / total);
        }
    }

    #[test]
    fn eeg_shows_alpha_peak_over_background() {
        let s = synth_signal(ClassLabel::Eeg, 8.0, 200.0, 3).unwrap();
        let psd = welch_psd(&s.samples, 200.0, &WelchConfig::default()).unwrap();
        let band = |lo: f64, hi: f64| -> f64 {
            psd.frequencies_hz
                .iter()
                .zip(&psd.power)
                .filter(|(f, _)| **f >= lo && **f <= hi)
                .map(|(_, p)| p)
                .sum::<f64>()
        };
        // alpha band beats the equally wide band just above it
        assert!(band(8.0, 12.0) > band(14.0, 18.0));
    }

    #[test]
    fn audio_energy_is_in_the_audible_band() {
        let s = synth_signal(ClassLabel::NonBio, 8.0, 1000.0, 4).unwrap();
        let psd = welch_psd(&s.samples, 1000.0, &WelchConfig::default()).unwrap();
        let total: f64 = psd.power.iter().sum();
        let high: f64 = psd
            .frequencies_hz
            .iter()
            .zip(&psd.power)
            .filter(|(f, _)| **f >= 90.0)
            .map(|(_, p)| p)
            .sum();
        assert!(high / total > 0.8, "{}", high / total);
    }

    #[test]
    fn generators_are_seeded() {
        for label in ClassLabel::ALL {
            let a = synth_signal(label, 2.0, 200.0, 9).unwrap();
            let b = synth_signal(label, 2.0, 200.0, 9).unwrap();
            let c = synth_signal(label, 2.0, 200.0, 10).unwrap();
            let bits = |s: &Signal| s.samples.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&a), bits(&b), "{label}");
            assert_ne!(bits(&a), bits(&c), "{label}");
            assert_eq!(a.len(), 400);
            assert_eq!(a.label, Some(label));
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(synth_signal(ClassLabel::Ecg, 0.0, 100.0, 1).is_err());
        assert!(synth_signal(ClassLabel::Ecg, 1.0, -5.0, 1).is_err());
    }
}
