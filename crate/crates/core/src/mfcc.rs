//! Mel-frequency cepstral coefficients.
//!
//! Stages, each exposed on its own so they can be checked in isolation:
//! Hamming-windowed framing, zero-padded power spectrum, a peak-normalized
//! triangular mel filterbank, natural-log band energies, and an orthonormal
//! DCT-II. [`pool_features`] reduces the per-frame matrix to one vector.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::AudioClip;
use crate::segment::{ms_to_samples, VowelSegment};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MfccError {
    #[error("negative frequency {0}")]
    NegativeFrequency(f64),
    #[error("segment of {samples} samples is shorter than one {frame}-sample frame")]
    SegmentTooShort { samples: usize, frame: usize },
    #[error("{bins} spectrum bins cannot feed {bands} mel bands")]
    TooFewBins { bins: usize, bands: usize },
    #[error("cannot pool an empty coefficient matrix")]
    EmptyMatrix,
    #[error("invalid MFCC configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MfccConfig {
    pub frame_ms: f64,
    pub hop_ms: f64,
    pub n_bands: usize,
    pub n_coeffs: usize,
    pub fmin: f64,
    /// Upper filterbank edge; `None` means Nyquist of the clip being analysed.
    pub fmax: Option<f64>,
    pub log_floor: f64,
    /// First-order pre-emphasis coefficient; off unless set.
    pub pre_emphasis: Option<f64>,
}

impl Default for MfccConfig {
    fn default() -> Self {
        Self {
            frame_ms: 20.0,
            hop_ms: 10.0,
            n_bands: 100,
            n_coeffs: 50,
            fmin: 0.0,
            fmax: None,
            log_floor: 1e-10,
            pre_emphasis: None,
        }
    }
}

impl MfccConfig {
    fn band_limits(&self, sample_rate: u32) -> Result<(f64, f64), MfccError> {
        let nyquist = sample_rate as f64 / 2.0;
        let fmax = self.fmax.unwrap_or(nyquist);
        if self.n_coeffs == 0 || self.n_coeffs > self.n_bands {
            return Err(MfccError::InvalidConfig(format!(
                "need 0 < n_coeffs ({}) <= n_bands ({})",
                self.n_coeffs, self.n_bands
            )));
        }
        if !(0.0 <= self.fmin && self.fmin < fmax && fmax <= nyquist) {
            return Err(MfccError::InvalidConfig(format!(
                "need 0 <= fmin < fmax <= {nyquist}, got {} / {fmax}",
                self.fmin
            )));
        }
        if self.log_floor.is_nan() || self.log_floor <= 0.0 {
            return Err(MfccError::InvalidConfig("log_floor must be positive".into()));
        }
        Ok((self.fmin, fmax))
    }

    pub fn frame_samples(&self, sample_rate: u32) -> usize {
        ms_to_samples(self.frame_ms, sample_rate)
    }

    pub fn hop_samples(&self, sample_rate: u32) -> usize {
        ms_to_samples(self.hop_ms, sample_rate)
    }
}

pub fn hz_to_mel(f: f64) -> Result<f64, MfccError> {
    if f < 0.0 {
        return Err(MfccError::NegativeFrequency(f));
    }
    Ok(2595.0 * (1.0 + f / 700.0).log10())
}

pub fn mel_to_hz(m: f64) -> Result<f64, MfccError> {
    if m < 0.0 {
        return Err(MfccError::NegativeFrequency(m));
    }
    Ok(700.0 * (10f64.powf(m / 2595.0) - 1.0))
}

pub fn hamming(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| 0.54 - 0.46 * (2.0 * PI * i as f64 / (n - 1) as f64).cos())
        .collect()
}

/// Cuts the segment into Hamming-windowed frames; a trailing partial frame is dropped.
pub fn frame_signal(clip: &AudioClip, segment: &VowelSegment, cfg: &MfccConfig) -> Result<Vec<Vec<f64>>, MfccError> {
    let rate = clip.sample_rate();
    let frame = cfg.frame_samples(rate);
    let hop = cfg.hop_samples(rate);
    if frame == 0 || hop == 0 {
        return Err(MfccError::InvalidConfig("frame or hop rounds to zero".into()));
    }
    let end = segment.end_sample.min(clip.len());
    let start = segment.start_sample.min(end);
    let mut region = clip.samples()[start..end].to_vec();
    if region.len() < frame {
        return Err(MfccError::SegmentTooShort {
            samples: region.len(),
            frame,
        });
    }
    if let Some(alpha) = cfg.pre_emphasis {
        for i in (1..region.len()).rev() {
            region[i] -= alpha * region[i - 1];
        }
    }
    let window = hamming(frame);
    let count = (region.len() - frame) / hop + 1;
    Ok((0..count)
        .map(|t| {
            region[t * hop..t * hop + frame]
                .iter()
                .zip(&window)
                .map(|(x, w)| x * w)
                .collect()
        })
        .collect())
}

pub fn fft_size(frame_len: usize) -> usize {
    frame_len.max(1).next_power_of_two()
}

/// `|X[k]|^2` for `k = 0..=n_fft/2` of the zero-padded frame, unnormalized DFT.
pub fn power_spectrum(frame: &[f64]) -> Vec<f64> {
    let n_fft = fft_size(frame.len());
    let mut buf: Vec<Complex<f64>> = frame
        .iter()
        .map(|&x| Complex::new(x, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(n_fft)
        .collect();
    planned_fft(n_fft).process(&mut buf);
    buf[..=n_fft / 2].iter().map(|c| c.norm_sqr()).collect()
}

fn planned_fft(n: usize) -> Arc<dyn rustfft::Fft<f64>> {
    static PLANS: OnceLock<Mutex<FftPlanner<f64>>> = OnceLock::new();
    PLANS
        .get_or_init(|| Mutex::new(FftPlanner::new()))
        .lock()
        .expect("fft planner poisoned")
        .plan_fft_forward(n)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    /// `n_bands` rows of `n_fft/2 + 1` weights.
    pub weights: Vec<Vec<f64>>,
    /// `n_bands + 2` edge frequencies in Hz.
    pub edges_hz: Vec<f64>,
}

impl MelFilterbank {
    pub fn n_bands(&self) -> usize {
        self.weights.len()
    }

    pub fn centers_hz(&self) -> &[f64] {
        &self.edges_hz[1..self.edges_hz.len() - 1]
    }

    pub fn apply(&self, spectrum: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .map(|row| row.iter().zip(spectrum).map(|(w, p)| w * p).sum())
            .collect()
    }
}

/// Uniform-in-mel edges; band `k` is the peak-1 triangle over edges `k, k+1, k+2`
/// sampled at the FFT bin centers.
pub fn build_filterbank(cfg: &MfccConfig, n_fft: usize, sample_rate: u32) -> Result<MelFilterbank, MfccError> {
    let (fmin, fmax) = cfg.band_limits(sample_rate)?;
    let bins = n_fft / 2 + 1;
    if bins < cfg.n_bands {
        return Err(MfccError::TooFewBins {
            bins,
            bands: cfg.n_bands,
        });
    }
    let mel_lo = hz_to_mel(fmin)?;
    let mel_hi = hz_to_mel(fmax)?;
    let step = (mel_hi - mel_lo) / (cfg.n_bands + 1) as f64;
    let edges_hz = (0..cfg.n_bands + 2)
        .map(|i| mel_to_hz(mel_lo + step * i as f64))
        .collect::<Result<Vec<_>, _>>()?;
    let bin_hz = sample_rate as f64 / n_fft as f64;

    let weights = (0..cfg.n_bands)
        .map(|k| {
            let (left, peak, right) = (edges_hz[k], edges_hz[k + 1], edges_hz[k + 2]);
            (0..bins)
                .map(|b| {
                    let f = b as f64 * bin_hz;
                    if f <= left || f >= right {
                        0.0
                    } else if f <= peak {
                        (f - left) / (peak - left)
                    } else {
                        (right - f) / (right - peak)
                    }
                })
                .collect()
        })
        .collect();
    Ok(MelFilterbank { weights, edges_hz })
}

#[derive(Hash, PartialEq, Eq)]
struct BankKey {
    fmin: u64,
    fmax: u64,
    n_bands: usize,
    n_fft: usize,
    sample_rate: u32,
}

/// Memoized [`build_filterbank`].
pub fn cached_filterbank(cfg: &MfccConfig, n_fft: usize, sample_rate: u32) -> Result<Arc<MelFilterbank>, MfccError> {
    static CACHE: OnceLock<Mutex<HashMap<BankKey, Arc<MelFilterbank>>>> = OnceLock::new();
    let (fmin, fmax) = cfg.band_limits(sample_rate)?;
    let key = BankKey {
        fmin: fmin.to_bits(),
        fmax: fmax.to_bits(),
        n_bands: cfg.n_bands,
        n_fft,
        sample_rate,
    };
    let cache = CACHE.get_or_init(Default::default);
    if let Some(bank) = cache.lock().expect("filterbank cache poisoned").get(&key) {
        return Ok(Arc::clone(bank));
    }
    let bank = Arc::new(build_filterbank(cfg, n_fft, sample_rate)?);
    cache
        .lock()
        .expect("filterbank cache poisoned")
        .entry(key)
        .or_insert_with(|| Arc::clone(&bank));
    Ok(bank)
}

pub fn log_mel_energies(spectrum: &[f64], bank: &MelFilterbank, log_floor: f64) -> Vec<f64> {
    bank.apply(spectrum)
        .into_iter()
        .map(|e| e.max(log_floor).ln())
        .collect()
}

/// Orthonormal DCT-II basis, `n_coeffs` rows by `n` columns.
pub fn dct_matrix(n: usize, n_coeffs: usize) -> Vec<Vec<f64>> {
    (0..n_coeffs)
        .map(|k| {
            let scale = if k == 0 {
                (1.0 / n as f64).sqrt()
            } else {
                (2.0 / n as f64).sqrt()
            };
            (0..n)
                .map(|i| scale * (PI * k as f64 * (2 * i + 1) as f64 / (2 * n) as f64).cos())
                .collect()
        })
        .collect()
}

/// First `n_coeffs` orthonormal DCT-II coefficients of `x`.
pub fn dct_ii(x: &[f64], n_coeffs: usize) -> Vec<f64> {
    assert!(n_coeffs <= x.len(), "n_coeffs {} > input length {}", n_coeffs, x.len());
    dct_matrix(x.len(), n_coeffs)
        .iter()
        .map(|row| row.iter().zip(x).map(|(c, v)| c * v).sum())
        .collect()
}

type DctMatrix = Arc<Vec<Vec<f64>>>;

fn cached_dct(n: usize, n_coeffs: usize) -> DctMatrix {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), DctMatrix>>> = OnceLock::new();
    let mut cache = CACHE.get_or_init(Default::default).lock().expect("dct cache poisoned");
    Arc::clone(
        cache
            .entry((n, n_coeffs))
            .or_insert_with(|| Arc::new(dct_matrix(n, n_coeffs))),
    )
}

/// Per-frame cepstral coefficients, one row per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct MfccMatrix {
    pub frames: Vec<Vec<f64>>,
    pub config: MfccConfig,
}

impl MfccMatrix {
    pub fn n_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in &self.frames {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

pub fn mfcc(clip: &AudioClip, segment: &VowelSegment, cfg: &MfccConfig) -> Result<MfccMatrix, MfccError> {
    let rate = clip.sample_rate();
    let frames = frame_signal(clip, segment, cfg)?;
    let n_fft = fft_size(cfg.frame_samples(rate));
    let bank = cached_filterbank(cfg, n_fft, rate)?;
    let dct = cached_dct(cfg.n_bands, cfg.n_coeffs);
    let frames = frames
        .iter()
        .map(|f| {
            let energies = log_mel_energies(&power_spectrum(f), &bank, cfg.log_floor);
            dct.iter()
                .map(|row| row.iter().zip(&energies).map(|(c, e)| c * e).sum())
                .collect()
        })
        .collect();
    Ok(MfccMatrix {
        frames,
        config: cfg.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    #[default]
    Mean,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub pooling: Pooling,
}

pub fn pool_features(m: &MfccMatrix, mode: Pooling) -> Result<FeatureVector, MfccError> {
    let first = m.frames.first().ok_or(MfccError::EmptyMatrix)?;
    let mut acc = vec![0.0; first.len()];
    for row in &m.frames {
        for (a, v) in acc.iter_mut().zip(row) {
            *a += v;
        }
    }
    let t = m.frames.len() as f64;
    Ok(FeatureVector {
        values: acc.into_iter().map(|a| a / t).collect(),
        pooling: mode,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(n: usize, rate: u32) -> VowelSegment {
        VowelSegment {
            start_sample: 0,
            end_sample: n,
            noise_ceiling: 0.0,
            threshold: 0.0,
            source_rate: rate,
        }
    }

    #[test]
    fn mel_anchor_points() {
        assert_eq!(hz_to_mel(0.0).unwrap(), 0.0);
        let m700 = hz_to_mel(700.0).unwrap();
        assert!((m700 - 2595.0 * 2f64.log10()).abs() < 1e-9);
        assert!((m700 - 781.172_839).abs() < 1e-6);
        for f in [100.0, 1000.0, 8000.0] {
            let back = mel_to_hz(hz_to_mel(f).unwrap()).unwrap();
            assert!(((back - f) / f).abs() < 1e-9);
        }
        assert!(matches!(hz_to_mel(-1.0), Err(MfccError::NegativeFrequency(_))));
        assert!(mel_to_hz(-1.0).is_err());
    }

    #[test]
    fn frame_counts() {
        let cfg = MfccConfig::default();
        let c = AudioClip::new(vec![0.1; 1600], 16000).unwrap();
        let frames = frame_signal(&c, &seg(1600, 16000), &cfg).unwrap();
        assert_eq!(frames.len(), 9);
        assert!(frames.iter().all(|f| f.len() == 320));

        let c = AudioClip::new(vec![1.0; 320], 16000).unwrap();
        let frames = frame_signal(&c, &seg(320, 16000), &cfg).unwrap();
        assert_eq!(frames.len(), 1);
        assert_eq!(frames[0], hamming(320));

        assert!(matches!(
            frame_signal(&c, &seg(319, 16000), &cfg),
            Err(MfccError::SegmentTooShort { .. })
        ));
    }

    #[test]
    fn spectrum_of_constant_and_zero() {
        let p = power_spectrum(&vec![1.0; 320]);
        assert_eq!(p.len(), 257);
        assert!((p[0] - 320.0 * 320.0).abs() < 1e-6);
        assert!(p.iter().skip(1).all(|&v| v < p[0]));
        assert!(power_spectrum(&vec![0.0; 320]).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn filterbank_shape() {
        let cfg = MfccConfig::default();
        let bank = build_filterbank(&cfg, 512, 16000).unwrap();
        assert_eq!(bank.weights.len(), 100);
        assert!(bank.weights.iter().all(|r| r.len() == 257));
        let mels: Vec<f64> = bank.edges_hz.iter().map(|&f| hz_to_mel(f).unwrap()).collect();
        let d0 = mels[1] - mels[0];
        for w in mels.windows(2) {
            assert!((w[1] - w[0] - d0).abs() < 1e-9);
        }
        for (k, row) in bank.weights.iter().enumerate() {
            assert!(row.iter().any(|&w| w > 0.0), "band {k} empty");
            assert!(row.iter().all(|&w| (0.0..=1.0).contains(&w)));
            let (l, r) = (bank.edges_hz[k], bank.edges_hz[k + 2]);
            for (b, &w) in row.iter().enumerate() {
                let f = b as f64 * 16000.0 / 512.0;
                if f <= l || f >= r {
                    assert_eq!(w, 0.0);
                }
            }
        }
        assert!(bank.centers_hz().windows(2).all(|w| w[1] > w[0]));
        let ones = vec![1.0; 257];
        for (out, row) in bank.apply(&ones).iter().zip(&bank.weights) {
            assert_eq!(*out, row.iter().sum::<f64>());
        }
        assert!(matches!(
            build_filterbank(&cfg, 128, 16000),
            Err(MfccError::TooFewBins { bins: 65, bands: 100 })
        ));
    }

    #[test]
    fn cache_matches_fresh_build() {
        let cfg = MfccConfig::default();
        let fresh = build_filterbank(&cfg, 512, 16000).unwrap();
        let cached = cached_filterbank(&cfg, 512, 16000).unwrap();
        assert_eq!(*cached, fresh);
        assert!(Arc::ptr_eq(&cached, &cached_filterbank(&cfg, 512, 16000).unwrap()));
    }

    #[test]
    fn log_energies_floor_and_scaling() {
        let cfg = MfccConfig::default();
        let bank = build_filterbank(&cfg, 512, 16000).unwrap();
        let zero = log_mel_energies(&vec![0.0; 257], &bank, 1e-10);
        assert!(zero.iter().all(|&e| e == 1e-10f64.ln()));
        assert!((1e-10f64.ln() - (-23.02585)).abs() < 1e-4);

        let spec: Vec<f64> = (0..257).map(|i| 1.0 + (i as f64 * 0.37).sin().abs()).collect();
        let doubled: Vec<f64> = spec.iter().map(|v| 2.0 * v).collect();
        let a = log_mel_energies(&spec, &bank, 1e-10);
        let b = log_mel_energies(&doubled, &bank, 1e-10);
        for (x, y) in a.iter().zip(&b) {
            assert!((y - x - 2f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn dct_of_constant_and_zero() {
        let c = dct_ii(&[2.5; 100], 50);
        assert!((c[0] - 2.5 * 10.0).abs() < 1e-12);
        assert!(c[1..].iter().all(|v| v.abs() < 1e-12));
        assert!(dct_ii(&[0.0; 100], 50).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pooling() {
        let cfg = MfccConfig::default();
        let one = MfccMatrix {
            frames: vec![vec![1.0, -2.0, 3.5]],
            config: cfg.clone(),
        };
        assert_eq!(pool_features(&one, Pooling::Mean).unwrap().values, vec![1.0, -2.0, 3.5]);
        let sym = MfccMatrix {
            frames: vec![vec![1.0, -2.0], vec![-1.0, 2.0]],
            config: cfg.clone(),
        };
        assert_eq!(pool_features(&sym, Pooling::Mean).unwrap().values, vec![0.0, 0.0]);
        let empty = MfccMatrix {
            frames: vec![],
            config: cfg,
        };
        assert_eq!(pool_features(&empty, Pooling::Mean), Err(MfccError::EmptyMatrix));
    }

    #[test]
    fn matrix_dimensions_and_determinism() {
        let x: Vec<f64> = (0..1600).map(|n| 0.3 * (n as f64 * 0.07).sin()).collect();
        let c = AudioClip::new(x, 16000).unwrap();
        let a = mfcc(&c, &seg(1600, 16000), &MfccConfig::default()).unwrap();
        assert_eq!(a.n_frames(), 9);
        assert!(a
            .frames
            .iter()
            .all(|r| r.len() == 50 && r.iter().all(|v| v.is_finite())));
        let b = mfcc(&c, &seg(1600, 16000), &MfccConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_config() {
        let c = AudioClip::new(vec![0.1; 1600], 16000).unwrap();
        let bad = MfccConfig {
            n_coeffs: 101,
            ..Default::default()
        };
        assert!(matches!(
            mfcc(&c, &seg(1600, 16000), &bad),
            Err(MfccError::InvalidConfig(_))
        ));
        let bad = MfccConfig {
            fmax: Some(9000.0),
            ..Default::default()
        };
        assert!(mfcc(&c, &seg(1600, 16000), &bad).is_err());
    }
}
