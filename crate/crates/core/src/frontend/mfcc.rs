use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::fft::Fft;
use super::{AudioClip, MfccMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MfccConfig {
    pub window_ms: u32,
    pub shift_ms: u32,
    pub fft_size: usize,
    pub mel_filter_count: usize,
    pub coeff_count: usize,
    pub mel_low_hz: f64,
    pub mel_high_hz: f64,
    pub log_floor: f64,
}

impl Default for MfccConfig {
    fn default() -> Self {
        MfccConfig {
            window_ms: 30,
            shift_ms: 10,
            fft_size: 512,
            mel_filter_count: 40,
            coeff_count: 40,
            mel_low_hz: 20.0,
            mel_high_hz: 4000.0,
            log_floor: 1e-10,
        }
    }
}

impl MfccConfig {
    pub fn window_samples(&self, sample_rate_hz: u32) -> usize {
        (sample_rate_hz as usize * self.window_ms as usize) / 1000
    }

    pub fn shift_samples(&self, sample_rate_hz: u32) -> usize {
        (sample_rate_hz as usize * self.shift_ms as usize) / 1000
    }

    /// Number of whole frames that fit in `len` samples.
    pub fn frame_count(&self, len: usize, sample_rate_hz: u32) -> usize {
        let window = self.window_samples(sample_rate_hz);
        if len < window {
            0
        } else {
            (len - window) / self.shift_samples(sample_rate_hz) + 1
        }
    }

    pub fn validate(&self, sample_rate_hz: u32) -> Result<()> {
        if !self.fft_size.is_power_of_two() {
            return Err(Error::FftSizeNotPowerOfTwo(self.fft_size));
        }
        let window = self.window_samples(sample_rate_hz);
        if window == 0 || self.shift_samples(sample_rate_hz) == 0 {
            return Err(Error::InvalidConfig("window and shift must be non-empty".into()));
        }
        if self.fft_size < window {
            return Err(Error::FrameTooLong {
                frame: window,
                fft_size: self.fft_size,
            });
        }
        if self.coeff_count == 0 || self.coeff_count > self.mel_filter_count {
            return Err(Error::InvalidConfig(format!(
                "coeff_count {} must be in 1..={}",
                self.coeff_count, self.mel_filter_count
            )));
        }
        let nyquist = f64::from(sample_rate_hz) / 2.0;
        if !(0.0 <= self.mel_low_hz && self.mel_low_hz < self.mel_high_hz && self.mel_high_hz <= nyquist) {
            return Err(Error::InvalidConfig(format!(
                "mel band [{}, {}] Hz must lie within [0, {nyquist}] Hz",
                self.mel_low_hz, self.mel_high_hz
            )));
        }
        if !(self.log_floor > 0.0) {
            return Err(Error::InvalidConfig("log_floor must be positive".into()));
        }
        Ok(())
    }
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

pub fn hamming_window(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    (0..len)
        .map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / (len - 1) as f64).cos())
        .collect()
}

/// Triangular mel filterbank, `filters × (fft_size/2 + 1)`, row-major.
///
/// Filter edges are equally spaced on the mel scale; weights are evaluated at
/// each bin's exact centre frequency, so narrow low-frequency filters still
/// pick up the nearest bins.
pub fn mel_filterbank(
    filters: usize,
    fft_size: usize,
    sample_rate_hz: u32,
    low_hz: f64,
    high_hz: f64,
) -> Vec<Vec<f64>> {
    let bins = fft_size / 2 + 1;
    let (mel_lo, mel_hi) = (hz_to_mel(low_hz), hz_to_mel(high_hz));
    let edges: Vec<f64> = (0..filters + 2)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (filters + 1) as f64))
        .collect();
    let bin_hz = f64::from(sample_rate_hz) / fft_size as f64;
    (0..filters)
        .map(|f| {
            let (left, centre, right) = (edges[f], edges[f + 1], edges[f + 2]);
            (0..bins)
                .map(|k| {
                    let hz = k as f64 * bin_hz;
                    if hz <= left || hz >= right {
                        0.0
                    } else if hz <= centre {
                        (hz - left) / (centre - left)
                    } else {
                        (right - hz) / (right - centre)
                    }
                })
                .collect()
        })
        .collect()
}

/// Orthonormal DCT-II basis, `keep × n`, row-major.
pub fn dct_matrix(keep: usize, n: usize) -> Vec<Vec<f64>> {
    (0..keep)
        .map(|k| {
            let scale = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
            (0..n)
                .map(|i| scale * (PI * k as f64 * (2 * i + 1) as f64 / (2 * n) as f64).cos())
                .collect()
        })
        .collect()
}

/// Precomputed window, filterbank, DCT basis and FFT plan for one config.
#[derive(Debug, Clone)]
pub struct MfccExtractor {
    cfg: MfccConfig,
    sample_rate_hz: u32,
    window: Vec<f64>,
    filterbank: Vec<Vec<f64>>,
    dct: Vec<Vec<f64>>,
    fft: Fft,
}

impl MfccExtractor {
    pub fn new(cfg: MfccConfig, sample_rate_hz: u32) -> Result<Self> {
        cfg.validate(sample_rate_hz)?;
        let fft = Fft::new(cfg.fft_size)?;
        Ok(MfccExtractor {
            window: hamming_window(cfg.window_samples(sample_rate_hz)),
            filterbank: mel_filterbank(
                cfg.mel_filter_count,
                cfg.fft_size,
                sample_rate_hz,
                cfg.mel_low_hz,
                cfg.mel_high_hz,
            ),
            dct: dct_matrix(cfg.coeff_count, cfg.mel_filter_count),
            fft,
            cfg,
            sample_rate_hz,
        })
    }

    pub fn config(&self) -> &MfccConfig {
        &self.cfg
    }

    pub fn filterbank(&self) -> &[Vec<f64>] {
        &self.filterbank
    }

    pub fn extract(&self, samples: &[f32]) -> Result<MfccMatrix> {
        let shift = self.cfg.shift_samples(self.sample_rate_hz);
        let frames = self.cfg.frame_count(samples.len(), self.sample_rate_hz);
        if frames == 0 {
            return Err(Error::InvalidShape(format!(
                "{} samples is shorter than one {}-sample window",
                samples.len(),
                self.window.len()
            )));
        }
        let coeffs = self.cfg.coeff_count;
        let mut values = Vec::with_capacity(frames * coeffs);
        let mut frame = vec![0.0; self.window.len()];
        let mut log_mel = vec![0.0; self.cfg.mel_filter_count];
        for i in 0..frames {
            let start = i * shift;
            for ((dst, &s), &w) in frame.iter_mut().zip(&samples[start..]).zip(&self.window) {
                *dst = f64::from(s) * w;
            }
            let power = self.fft.power_spectrum(&frame)?;
            for (slot, filter) in log_mel.iter_mut().zip(&self.filterbank) {
                let energy: f64 = filter.iter().zip(&power).map(|(w, p)| w * p).sum();
                *slot = energy.max(self.cfg.log_floor).ln();
            }
            values.extend(
                self.dct
                    .iter()
                    .map(|basis| basis.iter().zip(&log_mel).map(|(b, m)| b * m).sum::<f64>() as f32),
            );
        }
        MfccMatrix::new(values, frames, coeffs)
    }
}

/// Computes the MFCC matrix of an (already band-passed) clip.
pub fn compute_mfcc(clip: &AudioClip, cfg: &MfccConfig) -> Result<MfccMatrix> {
    MfccExtractor::new(cfg.clone(), clip.sample_rate_hz())?.extract(clip.samples())
}
