//! Canonical 16-bit mono PCM WAV.
//!
//! Writes always produce the 44-byte `RIFF`/`fmt `/`data` layout. Reads walk
//! the chunk list, so files with extra chunks (e.g. `LIST`) still parse.

use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::synth::AudioClip;

pub const HEADER_LEN: usize = 44;
const FULL_SCALE: f64 = 32_767.0;
const PCM_FORMAT: u16 = 1;

#[derive(Debug, Error)]
pub enum WavError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("unsupported encoding: format tag {format_tag}, {bits} bits per sample")]
    UnsupportedEncoding { format_tag: u16, bits: u16 },
    #[error("unsupported channel count {0}")]
    UnsupportedChannels(u16),
    #[error("unsupported sample rate {found} Hz (expected {expected} Hz)")]
    UnsupportedSampleRate { found: u32, expected: u32 },
    #[error("length mismatch: data chunk declares {declared} bytes, {actual} present")]
    LengthMismatch { declared: usize, actual: usize },
    #[error("sample {index} = {value} lies outside [-1, 1]")]
    SampleOutOfRange { index: usize, value: f32 },
}

/// What `read_wav` accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WavSpec {
    pub sample_rate: u32,
    pub channels: u16,
    pub bits_per_sample: u16,
}

impl Default for WavSpec {
    fn default() -> Self {
        WavSpec {
            sample_rate: 16_000,
            channels: 1,
            bits_per_sample: 16,
        }
    }
}

fn quantize(sample: f32) -> i16 {
    (sample as f64 * FULL_SCALE)
        .round()
        .clamp(i16::MIN as f64, i16::MAX as f64) as i16
}

pub fn encode_wav(clip: &AudioClip) -> Result<Vec<u8>, WavError> {
    if let Some((index, &value)) = clip
        .samples
        .iter()
        .enumerate()
        .find(|(_, s)| !(s.abs() <= 1.0))
    {
        return Err(WavError::SampleOutOfRange { index, value });
    }
    let data_len = clip.samples.len() * 2;
    let mut out = Vec::with_capacity(HEADER_LEN + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&PCM_FORMAT.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&clip.sample_rate.to_le_bytes());
    out.extend_from_slice(&(clip.sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in &clip.samples {
        out.extend_from_slice(&quantize(s).to_le_bytes());
    }
    Ok(out)
}

/// Writes through a sibling temp file and renames, so an interrupted run
/// never leaves a half-written WAV under the final name.
pub fn write_wav(clip: &AudioClip, path: &Path) -> Result<(), WavError> {
    let bytes = encode_wav(clip)?;
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("wav.partial");
    fs::write(&tmp, &bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

pub fn decode_wav(bytes: &[u8], spec: &WavSpec) -> Result<AudioClip, WavError> {
    let malformed = |m: &str| WavError::MalformedHeader(m.to_string());
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(malformed("missing RIFF/WAVE signature"));
    }
    let mut pos = 12;
    let mut fmt: Option<(u16, u16, u32, u16)> = None;
    loop {
        if pos + 8 > bytes.len() {
            return Err(malformed("no data chunk"));
        }
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body = pos + 8;
        match id {
            b"fmt " => {
                if size < 16 || body + 16 > bytes.len() {
                    return Err(malformed("fmt chunk too short"));
                }
                fmt = Some((
                    u16_at(bytes, body),
                    u16_at(bytes, body + 2),
                    u32_at(bytes, body + 4),
                    u16_at(bytes, body + 14),
                ));
            }
            b"data" => {
                let (format_tag, channels, rate, bits) =
                    fmt.ok_or_else(|| malformed("data chunk before fmt chunk"))?;
                if format_tag != PCM_FORMAT || bits != spec.bits_per_sample {
                    return Err(WavError::UnsupportedEncoding { format_tag, bits });
                }
                if channels != spec.channels {
                    return Err(WavError::UnsupportedChannels(channels));
                }
                if rate != spec.sample_rate {
                    return Err(WavError::UnsupportedSampleRate {
                        found: rate,
                        expected: spec.sample_rate,
                    });
                }
                let actual = bytes.len() - body;
                if actual < size || size % 2 != 0 {
                    return Err(WavError::LengthMismatch {
                        declared: size,
                        actual,
                    });
                }
                let samples = bytes[body..body + size]
                    .chunks_exact(2)
                    .map(|c| (i16::from_le_bytes([c[0], c[1]]) as f64 / FULL_SCALE) as f32)
                    .collect();
                return Ok(AudioClip {
                    samples,
                    sample_rate: rate,
                    meta: None,
                });
            }
            _ => {}
        }
        // chunks are word aligned
        pos = body + size + (size & 1);
    }
}

pub fn read_wav_with(path: &Path, spec: &WavSpec) -> Result<AudioClip, WavError> {
    decode_wav(&fs::read(path)?, spec)
}

pub fn read_wav(path: &Path) -> Result<AudioClip, WavError> {
    read_wav_with(path, &WavSpec::default())
}
