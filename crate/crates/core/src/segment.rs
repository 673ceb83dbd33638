//! Vowel localization by short-window RMS against a noise ceiling measured in
//! the leading silence.
//!
//! The clip is assumed to open with at least `lead_s` of background noise.
//! The loudest RMS frame inside that lead is the noise ceiling; frames louder
//! than twice the ceiling are vowel candidates. The longest candidate run that
//! lasts at least `min_run_ms` is the vowel, padded by `pad_ms` on both sides.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::AudioClip;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SegmentError {
    #[error("clip of {samples} samples is shorter than one {frame}-sample frame")]
    ClipTooShort { samples: usize, frame: usize },
    #[error("clip does not cover the {lead_s}s leading-silence window")]
    LeadTooShort { lead_s: f64 },
    #[error("no frame run above the vowel threshold")]
    NoVowelFound,
    #[error("leading silence is digital zero; threshold would admit every nonzero frame")]
    DegenerateThreshold,
    #[error("invalid segmentation parameters: {0}")]
    InvalidParams(String),
}

/// Per-frame RMS amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityTrack {
    pub values: Vec<f64>,
    pub frame_ms: f64,
    pub hop_ms: f64,
    pub sample_rate: u32,
}

impl IntensityTrack {
    pub fn frame_samples(&self) -> usize {
        ms_to_samples(self.frame_ms, self.sample_rate)
    }

    pub fn hop_samples(&self) -> usize {
        ms_to_samples(self.hop_ms, self.sample_rate)
    }
}

/// A detected vowel interval, `[start_sample, end_sample)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VowelSegment {
    pub start_sample: usize,
    pub end_sample: usize,
    pub noise_ceiling: f64,
    pub threshold: f64,
    pub source_rate: u32,
}

impl VowelSegment {
    /// A segment spanning a whole clip, for callers that already hold an
    /// isolated vowel.
    pub fn whole(clip: &AudioClip) -> Self {
        Self {
            start_sample: 0,
            end_sample: clip.len(),
            noise_ceiling: 0.0,
            threshold: 0.0,
            source_rate: clip.sample_rate(),
        }
    }

    pub fn len(&self) -> usize {
        self.end_sample - self.start_sample
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn start_s(&self) -> f64 {
        self.start_sample as f64 / self.source_rate as f64
    }

    pub fn end_s(&self) -> f64 {
        self.end_sample as f64 / self.source_rate as f64
    }

    /// `{start_s, end_s, noise_ceiling, threshold}` as emitted by the CLI.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "start_s": self.start_s(),
            "end_s": self.end_s(),
            "noise_ceiling": self.noise_ceiling,
            "threshold": self.threshold,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentParams {
    pub frame_ms: f64,
    pub hop_ms: f64,
    pub lead_s: f64,
    pub pad_ms: f64,
    pub min_run_ms: f64,
}

impl Default for SegmentParams {
    fn default() -> Self {
        Self {
            frame_ms: 10.0,
            hop_ms: 5.0,
            lead_s: 0.25,
            pad_ms: 30.0,
            min_run_ms: 40.0,
        }
    }
}

pub fn ms_to_samples(ms: f64, sample_rate: u32) -> usize {
    (ms * sample_rate as f64 / 1000.0).round() as usize
}

pub fn frame_rms(clip: &AudioClip, frame_ms: f64, hop_ms: f64) -> Result<IntensityTrack, SegmentError> {
    if !(hop_ms > 0.0 && frame_ms >= hop_ms) {
        return Err(SegmentError::InvalidParams(format!(
            "need frame_ms >= hop_ms > 0, got {frame_ms}/{hop_ms}"
        )));
    }
    let rate = clip.sample_rate();
    let frame = ms_to_samples(frame_ms, rate);
    let hop = ms_to_samples(hop_ms, rate);
    if frame == 0 || hop == 0 {
        return Err(SegmentError::InvalidParams(
            "frame or hop rounds to zero samples".into(),
        ));
    }
    let x = clip.samples();
    if x.len() < frame {
        return Err(SegmentError::ClipTooShort {
            samples: x.len(),
            frame,
        });
    }
    let count = (x.len() - frame) / hop + 1;
    let values = (0..count)
        .map(|i| {
            let w = &x[i * hop..i * hop + frame];
            (w.iter().map(|s| s * s).sum::<f64>() / frame as f64).sqrt()
        })
        .collect();
    Ok(IntensityTrack {
        values,
        frame_ms,
        hop_ms,
        sample_rate: rate,
    })
}

/// Largest RMS among frames lying entirely inside the first `lead_s` seconds.
pub fn noise_ceiling(track: &IntensityTrack, lead_s: f64) -> Result<f64, SegmentError> {
    let frame = track.frame_samples();
    let hop = track.hop_samples();
    let lead = (lead_s * track.sample_rate as f64).round() as usize;
    let covered = if track.values.is_empty() {
        0
    } else {
        (track.values.len() - 1) * hop + frame
    };
    if lead < frame || covered < lead {
        return Err(SegmentError::LeadTooShort { lead_s });
    }
    let in_lead = (lead - frame) / hop + 1;
    Ok(track.values[..in_lead].iter().copied().fold(0.0, f64::max))
}

/// Maximal runs of `true` as `(first, last)` inclusive index pairs.
fn runs(mask: impl IntoIterator<Item = bool>) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    let mut last = 0;
    for (i, on) in mask.into_iter().enumerate() {
        match (on, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push((s, i - 1));
                start = None;
            }
            _ => {}
        }
        last = i;
    }
    if let Some(s) = start {
        out.push((s, last));
    }
    out
}

/// Locates the vowel in `clip`.
///
/// A run of frames maps to the sample span between the centers of its first
/// and last frames, so a boundary lands within one hop of a sharp onset.
pub fn extract_vowel(clip: &AudioClip, params: &SegmentParams) -> Result<VowelSegment, SegmentError> {
    if params.pad_ms < 0.0 || params.min_run_ms < 0.0 {
        return Err(SegmentError::InvalidParams("negative pad or min run".into()));
    }
    let track = frame_rms(clip, params.frame_ms, params.hop_ms)?;
    let ceiling = noise_ceiling(&track, params.lead_s)?;
    let threshold = 2.0 * ceiling;
    let frame = track.frame_samples();
    let hop = track.hop_samples();
    let min_run = ms_to_samples(params.min_run_ms, clip.sample_rate()).max(1);

    let candidates: Vec<(usize, usize)> = runs(track.values.iter().map(|&v| v > threshold))
        .into_iter()
        .filter(|&(a, b)| (b - a) * hop >= min_run)
        .collect();
    if candidates.is_empty() {
        return Err(SegmentError::NoVowelFound);
    }
    if ceiling == 0.0 {
        return Err(SegmentError::DegenerateThreshold);
    }
    // max_by_key keeps the last maximum; reverse so ties go to the earliest run
    let &(first, last) = candidates.iter().rev().max_by_key(|&&(a, b)| b - a).expect("non-empty");

    let pad = ms_to_samples(params.pad_ms, clip.sample_rate());
    let start = first * hop + frame / 2;
    let end = last * hop + frame / 2;
    Ok(VowelSegment {
        start_sample: start.saturating_sub(pad),
        end_sample: (end + pad).min(clip.len()),
        noise_ceiling: ceiling,
        threshold,
        source_rate: clip.sample_rate(),
    })
}
