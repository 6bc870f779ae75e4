//! Minimal RIFF/WAVE reader and writer for 16-bit PCM mono audio.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::{AudioClip, SAMPLE_RATE_HZ};

const WAVE_FORMAT_PCM: u16 = 1;
const WAVE_FORMAT_EXTENSIBLE: u16 = 0xFFFE;

/// Decoded PCM samples at their original length.
#[derive(Debug, Clone, PartialEq)]
pub struct PcmSamples {
    pub samples: Vec<f32>,
    pub sample_rate_hz: u32,
}

struct FmtChunk {
    format_tag: u16,
    channels: u16,
    sample_rate: u32,
    bits_per_sample: u16,
}

fn u16_at(bytes: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([bytes[at], bytes[at + 1]])
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]])
}

/// Decodes an in-memory WAV image without any length normalization.
pub fn decode_wav(bytes: &[u8]) -> Result<PcmSamples> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(Error::MalformedWav("missing RIFF/WAVE header".into()));
    }

    let mut fmt: Option<FmtChunk> = None;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body_start = pos + 8;
        let body_end = body_start
            .checked_add(size)
            .filter(|&end| end <= bytes.len())
            .ok_or_else(|| {
                Error::MalformedWav(format!(
                    "chunk `{}` declares {size} bytes past end of file",
                    String::from_utf8_lossy(id)
                ))
            })?;
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => {
                if body.len() < 16 {
                    return Err(Error::MalformedWav("fmt chunk shorter than 16 bytes".into()));
                }
                let mut format_tag = u16_at(body, 0);
                if format_tag == WAVE_FORMAT_EXTENSIBLE && body.len() >= 26 {
                    // sub-format GUID starts with the plain format tag
                    format_tag = u16_at(body, 24);
                }
                fmt = Some(FmtChunk {
                    format_tag,
                    channels: u16_at(body, 2),
                    sample_rate: u32_at(body, 4),
                    bits_per_sample: u16_at(body, 14),
                });
            }
            b"data" => data = Some(body),
            _ => {}
        }
        // chunks are word aligned
        pos = body_end + (size & 1);
    }

    let fmt = fmt.ok_or_else(|| Error::MalformedWav("no fmt chunk".into()))?;
    let data = data.ok_or_else(|| Error::MalformedWav("no data chunk".into()))?;

    if fmt.format_tag != WAVE_FORMAT_PCM {
        return Err(Error::UnsupportedFormat(format!(
            "format tag {:#06x}, expected integer PCM",
            fmt.format_tag
        )));
    }
    let mut problems = Vec::new();
    if fmt.channels != 1 {
        problems.push(format!("{} channels (expected mono)", fmt.channels));
    }
    if fmt.sample_rate != SAMPLE_RATE_HZ {
        problems.push(format!(
            "{} Hz sample rate (expected {SAMPLE_RATE_HZ} Hz)",
            fmt.sample_rate
        ));
    }
    if fmt.bits_per_sample != 16 {
        problems.push(format!("{}-bit samples (expected 16-bit)", fmt.bits_per_sample));
    }
    if !problems.is_empty() {
        return Err(Error::UnsupportedFormat(problems.join(", ")));
    }
    if data.len() % 2 != 0 {
        return Err(Error::MalformedWav("odd-length 16-bit data chunk".into()));
    }

    let samples = data
        .chunks_exact(2)
        .map(|b| f32::from(i16::from_le_bytes([b[0], b[1]])) / 32768.0)
        .collect();
    Ok(PcmSamples {
        samples,
        sample_rate_hz: fmt.sample_rate,
    })
}

/// Reads a WAV file at its original length.
pub fn read_wav_samples(path: impl AsRef<Path>) -> Result<PcmSamples> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_wav(&bytes)
}

/// Reads a 16 kHz mono 16-bit WAV file as a one-second clip.
pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    let pcm = read_wav_samples(path)?;
    AudioClip::new(pcm.samples, pcm.sample_rate_hz)
}

/// Encodes samples as a 16-bit PCM mono WAV image. Samples are clamped to
/// [-1, 1) and scaled by 32768.
pub fn encode_wav(samples: &[f32], sample_rate_hz: u32) -> Vec<u8> {
    let data_len = (samples.len() * 2) as u32;
    let mut out = Vec::with_capacity(44 + samples.len() * 2);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&WAVE_FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&sample_rate_hz.to_le_bytes());
    out.extend_from_slice(&(sample_rate_hz * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in samples {
        let v = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn write_wav(path: impl AsRef<Path>, samples: &[f32], sample_rate_hz: u32) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_wav(samples, sample_rate_hz)).map_err(|e| Error::io(path, e))
}
