//! Causal band-pass stage: a 2nd-order Butterworth high-pass followed by a
//! 2nd-order Butterworth low-pass, both as bilinear-transform biquads.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use super::AudioClip;

pub const BAND_LOW_HZ: f64 = 20.0;
pub const BAND_HIGH_HZ: f64 = 4000.0;

/// Normalized biquad coefficients (a0 == 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    pub fn butterworth_lowpass(cutoff_hz: f64, sample_rate_hz: f64) -> Self {
        let (cos_w, alpha) = Self::prewarp(cutoff_hz, sample_rate_hz);
        let a0 = 1.0 + alpha;
        Biquad {
            b0: (1.0 - cos_w) / 2.0 / a0,
            b1: (1.0 - cos_w) / a0,
            b2: (1.0 - cos_w) / 2.0 / a0,
            a1: -2.0 * cos_w / a0,
            a2: (1.0 - alpha) / a0,
        }
    }

    pub fn butterworth_highpass(cutoff_hz: f64, sample_rate_hz: f64) -> Self {
        let (cos_w, alpha) = Self::prewarp(cutoff_hz, sample_rate_hz);
        let a0 = 1.0 + alpha;
        Biquad {
            b0: (1.0 + cos_w) / 2.0 / a0,
            b1: -(1.0 + cos_w) / a0,
            b2: (1.0 + cos_w) / 2.0 / a0,
            a1: -2.0 * cos_w / a0,
            a2: (1.0 - alpha) / a0,
        }
    }

    fn prewarp(cutoff_hz: f64, sample_rate_hz: f64) -> (f64, f64) {
        let w0 = 2.0 * PI * cutoff_hz / sample_rate_hz;
        (w0.cos(), w0.sin() / (2.0 * FRAC_1_SQRT_2))
    }

    /// Runs the filter from zero state over `samples` (transposed direct form II).
    pub fn run(&self, samples: &mut [f64]) {
        let (mut z1, mut z2) = (0.0, 0.0);
        for x in samples.iter_mut() {
            let input = *x;
            let y = self.b0 * input + z1;
            z1 = self.b1 * input - self.a1 * y + z2;
            z2 = self.b2 * input - self.a2 * y;
            *x = y;
        }
    }
}

/// Applies the 20 Hz to 4 kHz band-pass cascade to a clip.
pub fn bandpass_filter(clip: &AudioClip) -> AudioClip {
    let rate = f64::from(clip.sample_rate_hz());
    let mut work: Vec<f64> = clip.samples().iter().map(|&s| f64::from(s)).collect();
    Biquad::butterworth_highpass(BAND_LOW_HZ, rate).run(&mut work);
    Biquad::butterworth_lowpass(BAND_HIGH_HZ, rate).run(&mut work);
    AudioClip::from_normalized(work.into_iter().map(|s| s as f32).collect())
}
