//! Welch power spectral density.
//!
//! Hann-windowed (periodic), mean-detrended segments with fractional overlap;
//! periodograms are averaged and scaled to a one-sided density so that
//! `sum(power) * df` approximates the variance of the input.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WelchConfig {
    pub window_s: f64,
    pub overlap_frac: f64,
}

impl Default for WelchConfig {
    fn default() -> Self {
        WelchConfig {
            window_s: 1.0,
            overlap_frac: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsdEstimate {
    pub frequencies_hz: Vec<f64>,
    /// One-sided density, amplitude² / Hz.
    pub power: Vec<f64>,
    pub segments_averaged: usize,
}

impl PsdEstimate {
    pub fn resolution_hz(&self) -> f64 {
        self.frequencies_hz.get(1).copied().unwrap_or(0.0)
    }

    /// Rectangle-rule integral of the density over all bins.
    pub fn integral(&self) -> f64 {
        self.power.iter().sum::<f64>() * self.resolution_hz()
    }

    pub fn peak_frequency(&self) -> f64 {
        let (k, _) = self
            .power
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |best, (k, &p)| if p > best.1 { (k, p) } else { best });
        self.frequencies_hz[k]
    }

    /// Mean and population standard deviation of the density, DC bin excluded.
    pub fn stats_without_dc(&self) -> (f64, f64) {
        let body = &self.power[1..];
        let n = body.len() as f64;
        let mean = body.iter().sum::<f64>() / n;
        let var = body.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / n;
        (mean, var.sqrt())
    }
}

pub fn welch_psd(samples: &[f64], sample_rate_hz: f64, config: &WelchConfig) -> Result<PsdEstimate> {
    if !(0.0..1.0).contains(&config.overlap_frac) {
        return Err(Error::InvalidParameter(format!(
            "overlap fraction must be in [0, 1), got {}",
            config.overlap_frac
        )));
    }
    let nperseg = crate::signal::samples_for(config.window_s, sample_rate_hz);
    if nperseg < 8 {
        return Err(Error::InvalidParameter(format!(
            "Welch window of {} s at {sample_rate_hz} Hz is below 8 samples",
            config.window_s
        )));
    }
    if nperseg > samples.len() {
        return Err(Error::WindowLongerThanSegment {
            window: nperseg,
            len: samples.len(),
        });
    }
    let noverlap = (nperseg as f64 * config.overlap_frac).floor() as usize;
    let hop = nperseg - noverlap;
    let nseg = (samples.len() - nperseg) / hop + 1;

    let window: Vec<f64> = (0..nperseg)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / nperseg as f64).cos())
        .collect();
    let window_power: f64 = window.iter().map(|w| w * w).sum();

    let fft = FftPlanner::new().plan_fft_forward(nperseg);
    let nbins = nperseg / 2 + 1;
    let mut acc = vec![0.0f64; nbins];
    let mut buf = vec![Complex::new(0.0, 0.0); nperseg];
    for s in 0..nseg {
        let chunk = &samples[s * hop..s * hop + nperseg];
        let mean = chunk.iter().sum::<f64>() / nperseg as f64;
        for ((b, &x), &w) in buf.iter_mut().zip(chunk).zip(&window) {
            *b = Complex::new((x - mean) * w, 0.0);
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
    }

    let scale = 1.0 / (sample_rate_hz * window_power * nseg as f64);
    let nyquist_bin = (nperseg % 2 == 0).then_some(nperseg / 2);
    let power = acc
        .iter()
        .enumerate()
        .map(|(k, &a)| {
            let one_sided = if k == 0 || Some(k) == nyquist_bin { 1.0 } else { 2.0 };
            a * scale * one_sided
        })
        .collect();
    let frequencies_hz = (0..nbins)
        .map(|k| k as f64 * sample_rate_hz / nperseg as f64)
        .collect();
    Ok(PsdEstimate {
        frequencies_hz,
        power,
        segments_averaged: nseg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};
    use std::f64::consts::PI;

    fn variance(xs: &[f64]) -> f64 {
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
    }

    #[test]
    fn eight_seconds_average_fifteen_windows() {
        let psd = welch_psd(&vec![0.0; 800], 100.0, &WelchConfig::default()).unwrap();
        assert_eq!(psd.segments_averaged, 15);
        assert_eq!(psd.power.len(), 51);
        assert_eq!(psd.frequencies_hz[50], 50.0);
        assert!(psd.frequencies_hz.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn zero_signal_has_zero_power() {
        let psd = welch_psd(&vec![0.0; 1000], 125.0, &WelchConfig::default()).unwrap();
        assert!(psd.power.iter().all(|&p| p == 0.0));
        assert_eq!(psd.stats_without_dc(), (0.0, 0.0));
    }

    #[test]
    fn bin_centred_sinusoid_integrates_to_half_amplitude_squared() {
        let fs = 200.0;
        for (amp, f0) in [(1.0, 10.0), (3.5, 37.0), (0.2, 80.0)] {
            let xs: Vec<f64> = (0..1600)
                .map(|i| amp * (2.0 * PI * f0 * i as f64 / fs).sin())
                .collect();
            let psd = welch_psd(&xs, fs, &WelchConfig::default()).unwrap();
            assert_eq!(psd.peak_frequency(), f0);
            let want = amp * amp / 2.0;
            assert!((psd.integral() - want).abs() / want < 0.05, "{} vs {want}", psd.integral());
        }
    }

    #[test]
    fn white_noise_is_flat_and_integrates_to_variance() {
        let mut rng = crate::rng::stream(9, &[]);
        let xs: Vec<f64> = (0..800).map(|_| StandardNormal.sample(&mut rng)).collect();
        let psd = welch_psd(&xs, 100.0, &WelchConfig::default()).unwrap();
        let v = variance(&xs);
        assert!((psd.integral() - v).abs() / v < 0.1);
        // flat: low and high halves of the band carry similar power
        let low: f64 = psd.power[1..25].iter().sum();
        let high: f64 = psd.power[25..50].iter().sum();
        assert!((low / high - 1.0).abs() < 0.35, "{low} vs {high}");
    }

    #[test]
    fn window_longer_than_segment() {
        let err = welch_psd(&vec![1.0; 50], 100.0, &WelchConfig::default()).unwrap_err();
        assert!(matches!(err, Error::WindowLongerThanSegment { window: 100, len: 50 }));
    }

    #[test]
    fn invalid_configs() {
        let xs = vec![0.0; 100];
        let bad_overlap = WelchConfig { window_s: 0.5, overlap_frac: 1.0 };
        assert!(welch_psd(&xs, 100.0, &bad_overlap).is_err());
        let tiny = WelchConfig { window_s: 0.05, overlap_frac: 0.5 };
        assert!(welch_psd(&xs, 100.0, &tiny).is_err());
    }
}
