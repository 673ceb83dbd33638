//! Mono PCM / IEEE-float WAV reading and writing.
//!
//! Only the `fmt ` and `data` chunks are interpreted; any other chunk is
//! skipped. Samples are held as `f64` normalized to `[-1, 1]` and the sample
//! rate is taken verbatim from the header.

use std::fs;
use std::path::Path;

use thiserror::Error;

const FORMAT_PCM: u16 = 1;
const FORMAT_IEEE_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("malformed WAV header: {0}")]
    MalformedHeader(String),
    #[error("unsupported WAV format: {0}")]
    UnsupportedFormat(String),
    #[error("invalid clip: {0}")]
    InvalidClip(String),
    #[error("I/O failure on {path}: {source}")]
    IoFailure {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// A mono recording with samples in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioClip {
    /// Builds a clip, rejecting a zero rate and any sample outside `[-1, 1]`
    /// (NaN included).
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self, AudioError> {
        if sample_rate == 0 {
            return Err(AudioError::InvalidClip("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !(-1.0..=1.0).contains(s)) {
            return Err(AudioError::InvalidClip(format!(
                "sample {i} = {} outside [-1, 1]",
                samples[i]
            )));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Multiplies every sample by `factor`, clamping the result to `[-1, 1]`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|s| (s * factor).clamp(-1.0, 1.0)).collect(),
            sample_rate: self.sample_rate,
        }
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}

/// Sample encoding used when writing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitDepth {
    Pcm16,
    Float32,
}

impl BitDepth {
    pub fn from_bits(bits: u16) -> Option<Self> {
        match bits {
            16 => Some(Self::Pcm16),
            32 => Some(Self::Float32),
            _ => None,
        }
    }
}

fn io_err(path: &Path, source: std::io::Error) -> AudioError {
    AudioError::IoFailure {
        path: path.display().to_string(),
        source,
    }
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioClip, AudioError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    decode_wav(&bytes)
}

fn le_u16(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn le_u32(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

struct FmtChunk {
    format: u16,
    channels: u16,
    sample_rate: u32,
    bits: u16,
}

/// Decodes an in-memory WAV file.
pub fn decode_wav(bytes: &[u8]) -> Result<AudioClip, AudioError> {
    if bytes.len() < 12 {
        return Err(AudioError::MalformedHeader("file shorter than RIFF header".into()));
    }
    if &bytes[0..4] != b"RIFF" {
        return Err(AudioError::MalformedHeader("missing RIFF tag".into()));
    }
    if &bytes[8..12] != b"WAVE" {
        return Err(AudioError::MalformedHeader("missing WAVE tag".into()));
    }

    let mut fmt: Option<FmtChunk> = None;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = le_u32(bytes, pos + 4) as usize;
        let body_start = pos + 8;
        let body_end = body_start
            .checked_add(size)
            .filter(|&end| end <= bytes.len())
            .ok_or_else(|| AudioError::MalformedHeader(format!("chunk {:?} truncated", String::from_utf8_lossy(id))))?;
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => {
                if body.len() < 16 {
                    return Err(AudioError::MalformedHeader("fmt chunk too short".into()));
                }
                let mut format = le_u16(body, 0);
                if format == FORMAT_EXTENSIBLE && body.len() >= 26 {
                    // first two bytes of the sub-format GUID carry the real code
                    format = le_u16(body, 24);
                }
                fmt = Some(FmtChunk {
                    format,
                    channels: le_u16(body, 2),
                    sample_rate: le_u32(body, 4),
                    bits: le_u16(body, 14),
                });
            }
            b"data" => data = Some(body),
            _ => {}
        }
        // chunks are word aligned
        pos = body_end + (size & 1);
    }

    let fmt = fmt.ok_or_else(|| AudioError::MalformedHeader("no fmt chunk".into()))?;
    let data = data.ok_or_else(|| AudioError::MalformedHeader("no data chunk".into()))?;

    if fmt.channels != 1 {
        return Err(AudioError::UnsupportedFormat(format!(
            "{} channels (mono only)",
            fmt.channels
        )));
    }
    if fmt.sample_rate == 0 {
        return Err(AudioError::MalformedHeader("sample rate is zero".into()));
    }
    let samples: Vec<f64> = match (fmt.format, fmt.bits) {
        (FORMAT_PCM, 16) => data
            .chunks_exact(2)
            .map(|c| i16::from_le_bytes([c[0], c[1]]) as f64 / 32768.0)
            .collect(),
        (FORMAT_IEEE_FLOAT, 32) => data
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .map(|s| if s.is_nan() { 0.0 } else { s.clamp(-1.0, 1.0) })
            .collect(),
        (FORMAT_PCM | FORMAT_IEEE_FLOAT, bits) => {
            return Err(AudioError::UnsupportedFormat(format!(
                "{bits}-bit samples for format code {}",
                fmt.format
            )))
        }
        (code, _) => return Err(AudioError::UnsupportedFormat(format!("compression code {code}"))),
    };
    AudioClip::new(samples, fmt.sample_rate)
}

/// Encodes a clip as a canonical 44-byte-header mono WAV.
pub fn encode_wav(clip: &AudioClip, depth: BitDepth) -> Vec<u8> {
    let (format, bits) = match depth {
        BitDepth::Pcm16 => (FORMAT_PCM, 16u16),
        BitDepth::Float32 => (FORMAT_IEEE_FLOAT, 32u16),
    };
    let block_align = bits / 8;
    let data_len = clip.len() * block_align as usize;
    let mut out = Vec::with_capacity(44 + data_len + 1);

    out.extend_from_slice(b"RIFF");
    let riff_len = 36 + data_len + (data_len & 1);
    out.extend_from_slice(&(riff_len as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");

    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&format.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&clip.sample_rate.to_le_bytes());
    out.extend_from_slice(&(clip.sample_rate * block_align as u32).to_le_bytes());
    out.extend_from_slice(&block_align.to_le_bytes());
    out.extend_from_slice(&bits.to_le_bytes());

    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    match depth {
        BitDepth::Pcm16 => {
            for &s in &clip.samples {
                out.extend_from_slice(&quantize_i16(s).to_le_bytes());
            }
        }
        BitDepth::Float32 => {
            for &s in &clip.samples {
                out.extend_from_slice(&(s as f32).to_le_bytes());
            }
        }
    }
    if data_len & 1 == 1 {
        out.push(0);
    }
    out
}

/// Round-to-nearest 16-bit quantization, clamped at full scale.
pub fn quantize_i16(sample: f64) -> i16 {
    (sample * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

pub fn write_wav(clip: &AudioClip, path: impl AsRef<Path>, depth: BitDepth) -> Result<(), AudioError> {
    let path = path.as_ref();
    fs::write(path, encode_wav(clip, depth)).map_err(|e| io_err(path, e))
}
