//! Formant-synthesis stand-in for consonant-vowel recordings.
//!
//! A vowel is an impulse train at `f0` driven through parallel two-pole
//! resonators, one per formant. A full sample is background noise, a quiet
//! consonant surrogate, a short closure gap and then the vowel, laid out in a
//! fixed-length clip. Every random choice comes from a ChaCha stream keyed by
//! the corpus seed and the entry index, so generation is reproducible and
//! order independent.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{encode_wav, AudioClip, AudioError, BitDepth};
use crate::manifest::{self, CorpusMetadata, Manifest, ManifestEntry, ManifestError};
use crate::phoneme::{ConsonantKind, VowelLabel, CONSONANTS};

pub const GENERATOR_VERSION: &str = concat!("vowelrec-synth/", env!("CARGO_PKG_VERSION"));

const DEFAULT_PROFILES: &str = include_str!("../data/vowel_profiles.json");

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid formant profile: {0}")]
    InvalidProfile(String),
    #[error("invalid layout: {0}")]
    InvalidLayout(String),
    #[error("invalid corpus config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error("I/O failure on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// `(center Hz, bandwidth Hz, relative amplitude)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Formant(pub f64, pub f64, pub f64);

impl Formant {
    pub fn freq(&self) -> f64 {
        self.0
    }
    pub fn bandwidth(&self) -> f64 {
        self.1
    }
    pub fn amplitude(&self) -> f64 {
        self.2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormantProfile {
    pub f0: f64,
    pub formants: Vec<Formant>,
    pub label: VowelLabel,
}

impl FormantProfile {
    pub fn validate(&self, sample_rate: u32) -> Result<(), SynthError> {
        let nyquist = sample_rate as f64 / 2.0;
        if self.formants.len() < 2 {
            return Err(SynthError::InvalidProfile("need at least two formants".into()));
        }
        if !(self.f0 > 0.0 && self.f0 < nyquist) {
            return Err(SynthError::InvalidProfile(format!(
                "f0 {} outside (0, {nyquist})",
                self.f0
            )));
        }
        for f in &self.formants {
            if !(f.freq() > 0.0 && f.freq() < nyquist) {
                return Err(SynthError::InvalidProfile(format!(
                    "formant {} Hz outside (0, {nyquist})",
                    f.freq()
                )));
            }
            if !(f.bandwidth() > 0.0 && f.bandwidth() < nyquist) {
                return Err(SynthError::InvalidProfile(format!("bandwidth {} Hz", f.bandwidth())));
            }
            if !(f.amplitude() > 0.0 && f.amplitude() <= 1.0) {
                return Err(SynthError::InvalidProfile(format!(
                    "relative amplitude {} outside (0, 1]",
                    f.amplitude()
                )));
            }
        }
        Ok(())
    }
}

/// Base per-vowel formant targets, loadable from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VowelProfiles {
    pub reference_f0: f64,
    pub vowels: Vec<VowelEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VowelEntry {
    pub label: VowelLabel,
    pub formants: Vec<Formant>,
}

impl Default for VowelProfiles {
    fn default() -> Self {
        serde_json::from_str(DEFAULT_PROFILES).expect("bundled vowel profiles parse")
    }
}

impl VowelProfiles {
    pub fn from_json(text: &str) -> Result<Self, SynthError> {
        let p: Self = serde_json::from_str(text).map_err(|e| SynthError::InvalidProfile(e.to_string()))?;
        for v in VowelLabel::ALL {
            if !p.vowels.iter().any(|e| e.label == v) {
                return Err(SynthError::InvalidProfile(format!("no profile for vowel {v}")));
            }
        }
        Ok(p)
    }

    pub fn profile(&self, label: VowelLabel) -> FormantProfile {
        let entry = self
            .vowels
            .iter()
            .find(|e| e.label == label)
            .expect("profiles cover every vowel");
        FormantProfile {
            f0: self.reference_f0,
            formants: entry.formants.clone(),
            label,
        }
    }
}

/// Two-pole resonator with unit gain at DC.
struct Resonator {
    a: f64,
    b: f64,
    c: f64,
    y1: f64,
    y2: f64,
}

impl Resonator {
    fn new(freq: f64, bandwidth: f64, sample_rate: u32) -> Self {
        let t = 1.0 / sample_rate as f64;
        let r = (-PI * bandwidth * t).exp();
        let c = -r * r;
        let b = 2.0 * r * (2.0 * PI * freq * t).cos();
        Self {
            a: 1.0 - b - c,
            b,
            c,
            y1: 0.0,
            y2: 0.0,
        }
    }

    fn step(&mut self, x: f64) -> f64 {
        let y = self.a * x + self.b * self.y1 + self.c * self.y2;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }
}

fn normalize_peak(x: &mut [f64], peak: f64) {
    let max = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max > 0.0 {
        let g = peak / max;
        x.iter_mut().for_each(|v| *v *= g);
    }
}

/// Raised-cosine ramps of `ramp` samples at both ends.
fn fade(x: &mut [f64], ramp: usize) {
    let n = x.len();
    let ramp = ramp.min(n / 2);
    for i in 0..ramp {
        let w = 0.5 * (1.0 - (PI * i as f64 / ramp as f64).cos());
        x[i] *= w;
        x[n - 1 - i] *= w;
    }
}

fn seconds_to_samples(s: f64, rate: u32) -> usize {
    (s * rate as f64).round() as usize
}

fn vowel_samples(profile: &FormantProfile, n: usize, sample_rate: u32, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let rate = sample_rate as f64;
    let period = rate / profile.f0;
    let mut excitation = vec![0.0; n];
    let mut t = rng.random::<f64>() * period;
    while (t.round() as usize) < n {
        excitation[t.round() as usize] = 1.0;
        // 1% period jitter
        t += period * (1.0 + 0.01 * (2.0 * rng.random::<f64>() - 1.0));
    }
    let mut out = vec![0.0; n];
    for f in &profile.formants {
        let mut res = Resonator::new(f.freq(), f.bandwidth(), sample_rate);
        for (o, &e) in out.iter_mut().zip(&excitation) {
            *o += f.amplitude() * res.step(e);
        }
    }
    normalize_peak(&mut out, 0.5);
    fade(&mut out, seconds_to_samples(0.010, sample_rate));
    out
}

/// A voiced segment of `duration` seconds, peak 0.5, with 10 ms fades.
pub fn synth_vowel(
    profile: &FormantProfile,
    duration: f64,
    sample_rate: u32,
    seed: u64,
) -> Result<AudioClip, SynthError> {
    profile.validate(sample_rate)?;
    if duration.is_nan() || duration <= 0.0 {
        return Err(SynthError::InvalidProfile(format!(
            "duration {duration} must be positive"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = seconds_to_samples(duration, sample_rate);
    Ok(AudioClip::new(
        vowel_samples(profile, n, sample_rate, &mut rng),
        sample_rate,
    )?)
}

/// Timing of a synthetic consonant-vowel clip, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvLayout {
    pub duration_s: f64,
    pub lead_silence_s: f64,
    /// Speech onset is delayed by a uniform draw in `[0, onset_jitter_s]`.
    pub onset_jitter_s: f64,
    pub vowel_min_s: f64,
    pub vowel_max_s: f64,
    pub noise_amp: f64,
}

impl Default for CvLayout {
    fn default() -> Self {
        Self {
            duration_s: 2.0,
            lead_silence_s: 0.30,
            onset_jitter_s: 0.15,
            vowel_min_s: 0.34,
            vowel_max_s: 0.42,
            noise_amp: 0.0015,
        }
    }
}

const CONSONANT_MAX_S: f64 = 0.120;

impl CvLayout {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.lead_silence_s < 0.25 {
            return Err(SynthError::InvalidLayout(format!(
                "lead silence {}s below 0.25s",
                self.lead_silence_s
            )));
        }
        if !(0.0 < self.vowel_min_s && self.vowel_min_s <= self.vowel_max_s) || self.onset_jitter_s < 0.0 {
            return Err(SynthError::InvalidLayout("bad vowel range or jitter".into()));
        }
        if !(0.0..=0.002).contains(&self.noise_amp) {
            return Err(SynthError::InvalidLayout(format!(
                "noise amplitude {} above 0.002",
                self.noise_amp
            )));
        }
        let needed = self.lead_silence_s + self.onset_jitter_s + CONSONANT_MAX_S + self.vowel_max_s;
        if needed > self.duration_s {
            return Err(SynthError::InvalidLayout(format!(
                "segments need {needed}s but the clip is {}s",
                self.duration_s
            )));
        }
        Ok(())
    }
}

/// A generated clip with its ground-truth intervals (sample indices, end exclusive).
#[derive(Debug, Clone, PartialEq)]
pub struct CvSample {
    pub clip: AudioClip,
    pub consonant: (usize, usize),
    pub vowel: (usize, usize),
}

fn band_noise(n: usize, center: f64, bandwidth: f64, sample_rate: u32, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut res = Resonator::new(center, bandwidth, sample_rate);
    (0..n).map(|_| res.step(2.0 * rng.random::<f64>() - 1.0)).collect()
}

/// Consonant surrogate: closure/burst/murmur shape by consonant class, then a
/// quiet gap before the vowel. The audible portion peaks between 0.12 and 0.25
/// and the whole surrogate lasts at most 120 ms.
fn consonant_samples(consonant_id: usize, sample_rate: u32, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let kind = CONSONANTS[consonant_id].kind;
    let nyquist = sample_rate as f64 / 2.0;
    let center = (900.0 + 230.0 * consonant_id as f64).min(0.8 * nyquist);
    let ms =
        |lo: f64, hi: f64, rng: &mut ChaCha8Rng| seconds_to_samples(rng.random_range(lo..hi) / 1000.0, sample_rate);

    let (closure, body_len) = match kind {
        ConsonantKind::Stop => (ms(20.0, 40.0, rng), ms(12.0, 25.0, rng)),
        ConsonantKind::Affricate => (ms(10.0, 20.0, rng), ms(30.0, 50.0, rng)),
        ConsonantKind::Fricative => (0, ms(45.0, 80.0, rng)),
        ConsonantKind::Sonorant => (0, ms(45.0, 75.0, rng)),
    };
    let gap = ms(25.0, 35.0, rng);
    let mut body = match kind {
        ConsonantKind::Sonorant => {
            let murmur = FormantProfile {
                f0: 120.0,
                formants: vec![Formant(250.0, 100.0, 1.0), Formant(center.min(2500.0), 200.0, 0.2)],
                label: VowelLabel::A,
            };
            vowel_samples(&murmur, body_len, sample_rate, rng)
        }
        _ => band_noise(body_len, center, 600.0, sample_rate, rng),
    };
    let peak = rng.random_range(0.12..0.25);
    normalize_peak(&mut body, peak);
    fade(&mut body, seconds_to_samples(0.003, sample_rate));

    let max_len = seconds_to_samples(CONSONANT_MAX_S, sample_rate);
    let mut out = vec![0.0; closure];
    out.extend(body);
    out.extend(std::iter::repeat_n(0.0, gap));
    out.truncate(max_len);
    out
}

/// One consonant-vowel clip: noise floor, consonant surrogate, vowel, noise floor.
pub fn synth_cv_sample(
    consonant_id: usize,
    profile: &FormantProfile,
    layout: &CvLayout,
    sample_rate: u32,
    seed: u64,
) -> Result<CvSample, SynthError> {
    layout.validate()?;
    profile.validate(sample_rate)?;
    if consonant_id >= CONSONANTS.len() {
        return Err(SynthError::InvalidConfig(format!(
            "consonant id {consonant_id} out of range"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = seconds_to_samples(layout.duration_s, sample_rate);
    let mut x: Vec<f64> = (0..total)
        .map(|_| layout.noise_amp * (2.0 * rng.random::<f64>() - 1.0))
        .collect();

    let onset = seconds_to_samples(
        layout.lead_silence_s + rng.random::<f64>() * layout.onset_jitter_s,
        sample_rate,
    );
    let consonant = consonant_samples(consonant_id, sample_rate, &mut rng);
    let vowel_len = seconds_to_samples(rng.random_range(layout.vowel_min_s..=layout.vowel_max_s), sample_rate);
    let vowel = vowel_samples(profile, vowel_len, sample_rate, &mut rng);

    let c_range = (onset, onset + consonant.len());
    let v_range = (c_range.1, c_range.1 + vowel.len());
    for (dst, src) in x[c_range.0..c_range.1].iter_mut().zip(&consonant) {
        *dst += src;
    }
    for (dst, src) in x[v_range.0..v_range.1].iter_mut().zip(&vowel) {
        *dst += src;
    }
    Ok(CvSample {
        clip: AudioClip::new(x, sample_rate)?,
        consonant: c_range,
        vowel: v_range,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusConfig {
    pub speakers: usize,
    pub seed: u64,
    pub sample_rate: u32,
    /// Consonant ids to include; all 23 by default.
    pub consonants: Vec<usize>,
    pub layout: CvLayout,
    pub profiles: VowelProfiles,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            speakers: 4,
            seed: 0,
            sample_rate: 16000,
            consonants: (0..CONSONANTS.len()).collect(),
            layout: CvLayout::default(),
            profiles: VowelProfiles::default(),
        }
    }
}

/// One synthetic speaker: a distinct f0 and perturbed copies of the base profiles.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerVoice {
    pub id: String,
    pub f0: f64,
    pub profiles: Vec<FormantProfile>,
}

pub fn speaker_id(index: usize) -> String {
    format!("spk{:02}", index + 1)
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const SPEAKER_STREAM: u64 = 1 << 32;

/// Even-indexed speakers get a low f0 register, odd-indexed a high one; f0 is
/// strictly increasing within each register. Formant frequencies move by at
/// most 8% from the base profile.
pub fn speaker_voice(index: usize, seed: u64, base: &VowelProfiles) -> SpeakerVoice {
    let mut rng = stream_rng(seed, SPEAKER_STREAM + index as u64);
    let register = if index.is_multiple_of(2) { 110.0 } else { 205.0 };
    let f0 = register + 7.0 * (index / 2) as f64 + 3.0 * rng.random::<f64>();
    let tract: f64 = rng.random_range(0.95..1.05);
    let profiles = VowelLabel::ALL
        .iter()
        .map(|&label| {
            let mut p = base.profile(label);
            p.f0 = f0;
            for f in &mut p.formants {
                let factor = (tract * rng.random_range(0.97..1.03)).clamp(0.92, 1.08);
                f.0 *= factor;
            }
            p
        })
        .collect();
    SpeakerVoice {
        id: speaker_id(index),
        f0,
        profiles,
    }
}

/// Per-utterance variation: f0 within 4%, formants within 1.5%.
fn utterance_profile(voice: &SpeakerVoice, vowel: VowelLabel, rng: &mut ChaCha8Rng) -> FormantProfile {
    let mut p = voice.profiles[vowel.index()].clone();
    p.f0 *= rng.random_range(0.96..1.04);
    for f in &mut p.formants {
        f.0 *= rng.random_range(0.985..1.015);
    }
    p
}

/// Deterministic sample for entry `(speaker, consonant, vowel)` of a corpus.
pub fn corpus_sample(
    config: &CorpusConfig,
    voice: &SpeakerVoice,
    speaker_index: usize,
    consonant_id: usize,
    vowel: VowelLabel,
) -> Result<CvSample, SynthError> {
    let entry_index = (speaker_index * CONSONANTS.len() + consonant_id) * VowelLabel::COUNT + vowel.index();
    let mut rng = stream_rng(config.seed, entry_index as u64);
    let profile = utterance_profile(voice, vowel, &mut rng);
    synth_cv_sample(consonant_id, &profile, &config.layout, config.sample_rate, rng.random())
}

pub fn entry_path(speaker: &str, consonant_id: usize, vowel: VowelLabel) -> String {
    format!(
        "{speaker}/{speaker}_c{consonant_id:02}{}_{}.wav",
        CONSONANTS[consonant_id].ascii,
        vowel.ascii()
    )
}

/// Writes one 16-bit WAV per (speaker, consonant, vowel), `manifest.csv`, and
/// the `manifest.json` metadata sidecar into `out_dir`.
pub fn generate_corpus(config: &CorpusConfig, out_dir: impl AsRef<Path>) -> Result<Manifest, SynthError> {
    let out_dir = out_dir.as_ref();
    if config.speakers < 1 {
        return Err(SynthError::InvalidConfig("need at least one speaker".into()));
    }
    if config.consonants.is_empty() {
        return Err(SynthError::InvalidConfig("empty consonant set".into()));
    }
    if let Some(&bad) = config.consonants.iter().find(|&&c| c >= CONSONANTS.len()) {
        return Err(SynthError::InvalidConfig(format!("consonant id {bad} out of range")));
    }
    config.layout.validate()?;

    let voices: Vec<SpeakerVoice> = (0..config.speakers)
        .map(|i| speaker_voice(i, config.seed, &config.profiles))
        .collect();
    for v in &voices {
        for p in &v.profiles {
            p.validate(config.sample_rate)?;
        }
    }

    let jobs: Vec<(usize, usize, VowelLabel)> = (0..config.speakers)
        .flat_map(|s| {
            config
                .consonants
                .iter()
                .flat_map(move |&c| VowelLabel::ALL.into_iter().map(move |v| (s, c, v)))
        })
        .collect();

    let io = |path: &Path, source| SynthError::Io {
        path: path.display().to_string(),
        source,
    };
    for v in &voices {
        let dir = out_dir.join(&v.id);
        fs::create_dir_all(&dir).map_err(|e| io(&dir, e))?;
    }

    let entries = jobs
        .par_iter()
        .map(|&(s, c, v)| {
            let voice = &voices[s];
            let sample = corpus_sample(config, voice, s, c, v)?;
            let rel = entry_path(&voice.id, c, v);
            let path = out_dir.join(&rel);
            fs::write(&path, encode_wav(&sample.clip, BitDepth::Pcm16)).map_err(|e| io(&path, e))?;
            Ok(ManifestEntry {
                path: rel,
                speaker: voice.id.clone(),
                consonant: CONSONANTS[c].symbol.to_string(),
                vowel: v,
            })
        })
        .collect::<Result<Vec<_>, SynthError>>()?;

    let manifest = Manifest::new(entries, out_dir)?;
    let manifest_path = out_dir.join("manifest.csv");
    manifest.write(&manifest_path)?;
    manifest::write_metadata(
        &CorpusMetadata {
            sample_rate: config.sample_rate,
            duration_s: config.layout.duration_s,
            seed: config.seed,
            generator_version: GENERATOR_VERSION.to_string(),
        },
        manifest::sidecar_path(&manifest_path),
    )?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile() -> FormantProfile {
        FormantProfile {
            f0: 100.0,
            formants: vec![Formant(700.0, 90.0, 1.0), Formant(1200.0, 110.0, 0.6)],
            label: VowelLabel::A,
        }
    }

    #[test]
    fn vowel_length_and_determinism() {
        let a = synth_vowel(&profile(), 0.3, 16000, 9).unwrap();
        assert_eq!(a.len(), 4800);
        assert_eq!(a, synth_vowel(&profile(), 0.3, 16000, 9).unwrap());
        let peak = a.samples().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(peak <= 0.5 + 1e-12);
        assert_eq!(a.samples()[0], 0.0);
    }

    #[test]
    fn nyquist_violation_rejected() {
        let mut p = profile();
        p.formants[1].0 = 8000.0;
        assert!(matches!(
            synth_vowel(&p, 0.3, 16000, 0),
            Err(SynthError::InvalidProfile(_))
        ));
        let mut p = profile();
        p.formants[0].2 = 1.5;
        assert!(p.validate(16000).is_err());
        let mut p = profile();
        p.formants.truncate(1);
        assert!(p.validate(16000).is_err());
    }

    #[test]
    fn cv_sample_layout() {
        let s = synth_cv_sample(4, &profile(), &CvLayout::default(), 16000, 3).unwrap();
        assert_eq!(s.clip.len(), 32000);
        let lead = &s.clip.samples()[..4000];
        assert!(lead.iter().all(|v| v.abs() <= 0.002));
        assert_eq!(s.consonant.1, s.vowel.0);
        assert!(s.consonant.1 - s.consonant.0 <= 1920);
        let c_peak = s.clip.samples()[s.consonant.0..s.consonant.1]
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(c_peak <= 0.25 + 0.002);
    }

    #[test]
    fn bad_layouts() {
        let l = CvLayout {
            lead_silence_s: 0.2,
            ..Default::default()
        };
        assert!(matches!(l.validate(), Err(SynthError::InvalidLayout(_))));
        let l = CvLayout {
            duration_s: 0.8,
            ..Default::default()
        };
        assert!(matches!(
            synth_cv_sample(0, &profile(), &l, 16000, 0),
            Err(SynthError::InvalidLayout(_))
        ));
    }

    #[test]
    fn default_profiles_are_separated() {
        let p = VowelProfiles::default();
        for a in VowelLabel::ALL {
            for b in VowelLabel::ALL {
                if a < b {
                    let (fa, fb) = (&p.profile(a).formants, &p.profile(b).formants);
                    let d = ((fa[0].0 - fb[0].0).powi(2) + (fa[1].0 - fb[1].0).powi(2)).sqrt();
                    assert!(d >= 150.0, "{a} vs {b}: {d}");
                }
            }
        }
    }

    #[test]
    fn speakers_distinct_and_bounded() {
        let base = VowelProfiles::default();
        let voices: Vec<_> = (0..10).map(|i| speaker_voice(i, 42, &base)).collect();
        for (i, a) in voices.iter().enumerate() {
            for b in &voices[i + 1..] {
                assert_ne!(a.f0, b.f0);
            }
            for p in &a.profiles {
                for (f, f_base) in p.formants.iter().zip(&base.profile(p.label).formants) {
                    let r = f.0 / f_base.0;
                    assert!((0.92..=1.08).contains(&r));
                }
            }
        }
        assert_eq!(speaker_voice(3, 42, &base), voices[3]);
    }
}
