//! Audio frontend: WAV loading, 20 Hz to 4 kHz band-pass, and MFCC extraction.
//!
//! A one-second 16 kHz clip becomes a 98 × 40 matrix (30 ms Hamming windows
//! every 10 ms, 40 mel filters, 40 DCT coefficients).

pub mod fft;
pub mod filter;
pub mod mfcc;
pub mod wav;

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub use fft::{power_spectrum, Fft};
pub use filter::bandpass_filter;
pub use mfcc::{compute_mfcc, MfccConfig, MfccExtractor};
pub use wav::{load_wav, read_wav_samples, write_wav};

pub const SAMPLE_RATE_HZ: u32 = 16000;
pub const CLIP_SAMPLES: usize = SAMPLE_RATE_HZ as usize;

/// Exactly one second of mono audio at 16 kHz.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f32>,
}

impl AudioClip {
    /// Pads with zeros or truncates to one second. Rejects any rate other than 16 kHz.
    pub fn new(mut samples: Vec<f32>, sample_rate_hz: u32) -> Result<Self> {
        if sample_rate_hz != SAMPLE_RATE_HZ {
            return Err(Error::UnsupportedFormat(format!(
                "{sample_rate_hz} Hz sample rate (expected {SAMPLE_RATE_HZ} Hz)"
            )));
        }
        samples.resize(CLIP_SAMPLES, 0.0);
        Ok(AudioClip { samples })
    }

    pub(crate) fn from_normalized(samples: Vec<f32>) -> Self {
        debug_assert_eq!(samples.len(), CLIP_SAMPLES);
        AudioClip { samples }
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        SAMPLE_RATE_HZ
    }
}

/// Frame-major `frame_count × coeff_count` matrix of finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct MfccMatrix {
    values: Vec<f32>,
    frame_count: usize,
    coeff_count: usize,
}

const MATRIX_MAGIC: &[u8; 4] = b"ESMF";
const MATRIX_VERSION: u32 = 1;

impl MfccMatrix {
    pub fn new(values: Vec<f32>, frame_count: usize, coeff_count: usize) -> Result<Self> {
        if frame_count == 0 || coeff_count == 0 || values.len() != frame_count * coeff_count {
            return Err(Error::InvalidShape(format!(
                "{} values for a {frame_count} × {coeff_count} matrix",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidShape(format!("non-finite value at index {pos}")));
        }
        Ok(MfccMatrix {
            values,
            frame_count,
            coeff_count,
        })
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    pub fn frame_count(&self) -> usize {
        self.frame_count
    }

    pub fn coeff_count(&self) -> usize {
        self.coeff_count
    }

    pub fn frames(&self) -> std::slice::ChunksExact<'_, f32> {
        self.values.chunks_exact(self.coeff_count)
    }

    /// ESMF encoding: magic, u32 version, u32 frames, u32 coeffs, then f32 LE values.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 4 * self.values.len());
        out.extend_from_slice(MATRIX_MAGIC);
        out.extend_from_slice(&MATRIX_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.frame_count as u32).to_le_bytes());
        out.extend_from_slice(&(self.coeff_count as u32).to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 || &bytes[..4] != MATRIX_MAGIC {
            return Err(Error::Format("missing ESMF header".into()));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        if word(4) != MATRIX_VERSION {
            return Err(Error::Format(format!("unsupported ESMF version {}", word(4))));
        }
        let (frames, coeffs) = (word(8) as usize, word(12) as usize);
        let body = &bytes[16..];
        if body.len() != frames * coeffs * 4 {
            return Err(Error::Format(format!(
                "ESMF body has {} bytes, expected {}",
                body.len(),
                frames * coeffs * 4
            )));
        }
        let values = body
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        MfccMatrix::new(values, frames, coeffs).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn write_to(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(&self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read_from(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_bytes(&fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}

/// Band-pass then MFCC, the fixed frontend ordering.
pub fn featurize(clip: &AudioClip, extractor: &MfccExtractor) -> Result<MfccMatrix> {
    extractor.extract(bandpass_filter(clip).samples())
}

/// `load_wav → bandpass_filter → compute_mfcc` with the default config.
pub fn preprocess(path: impl AsRef<Path>) -> Result<MfccMatrix> {
    let clip = load_wav(path)?;
    compute_mfcc(&bandpass_filter(&clip), &MfccConfig::default())
}
