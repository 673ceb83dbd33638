//! Helpers shared by the integration tests and the acceptance suite.
#![allow(dead_code)]

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vowelrec::mlp::{performance, Batch, MlpModel};
use vowelrec::scg::{train_scg, TrainOptions};
use vowelrec::segment::VowelSegment;
use vowelrec::synth::{synth_cv_sample, CvLayout, CvSample, VowelProfiles};
use vowelrec::VowelLabel;

pub const FD_STEP: f64 = 1e-5;

/// Per-component relative error with the denominator floored at 1e-3, so
/// components that are numerically zero are judged in absolute terms.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-3))
        .fold(0.0, f64::max)
}

/// Central differences of the training objective, one parameter at a time.
pub fn finite_difference(model: &MlpModel, batch: &Batch, gamma: f64) -> Vec<f64> {
    let base = model.params().to_vec();
    let mut probe = model.clone();
    (0..base.len())
        .map(|i| {
            let mut p = base.clone();
            p[i] = base[i] + FD_STEP;
            probe.set_params(&p);
            let up = performance(&probe, batch, gamma).unwrap();
            p[i] = base[i] - FD_STEP;
            probe.set_params(&p);
            let down = performance(&probe, batch, gamma).unwrap();
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

/// A small network with random weights, biases and normalization, plus a
/// random batch and regularization ratio.
pub fn random_instance(rng: &mut ChaCha8Rng) -> (MlpModel, Batch, f64) {
    let n_in = rng.random_range(1..=5);
    let n_hid = rng.random_range(1..=5);
    let n_out = rng.random_range(1..=6);
    let mut model = MlpModel::init(n_in, n_hid, n_out, rng.random());
    let params: Vec<f64> = model.params().iter().map(|_| rng.random_range(-2.0..2.0)).collect();
    model.set_params(&params);
    model.norm_mean = (0..n_in).map(|_| rng.random_range(-1.0..1.0)).collect();
    model.norm_std = (0..n_in).map(|_| rng.random_range(0.5..2.0)).collect();
    let mut batch = Batch::default();
    for _ in 0..rng.random_range(1..=8) {
        let x = (0..n_in).map(|_| rng.random_range(-3.0..3.0)).collect();
        let t = (0..n_out)
            .map(|_| if rng.random::<bool>() { 1.0 } else { 0.0 })
            .collect();
        batch.push(x, t);
    }
    let gamma = [0.0, 0.5, 1.0, rng.random::<f64>()][rng.random_range(0..4)];
    (model, batch, gamma)
}

/// Worst relative error over `count` random instances.
pub fn gradient_sweep(count: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let (model, batch, gamma) = random_instance(&mut rng);
            let analytic = vowelrec::mlp::gradient(&model, &batch, gamma).unwrap();
            max_relative_error(&analytic, &finite_difference(&model, &batch, gamma))
        })
        .fold(0.0, f64::max)
}

pub fn xor_batch() -> Batch {
    let mut b = Batch::default();
    for (x, t) in [
        ([0.0, 0.0], 0.0),
        ([0.0, 1.0], 1.0),
        ([1.0, 0.0], 1.0),
        ([1.0, 1.0], 0.0),
    ] {
        b.push(x.to_vec(), vec![t]);
    }
    b
}

/// Trains a 2-4-1 net on XOR with plain MSE; returns the final MSE.
pub fn xor_final_mse(seed: u64) -> f64 {
    let opts = TrainOptions {
        max_epochs: 500,
        reg_ratio: 0.0,
        seed,
        ..Default::default()
    };
    let (_, report) = train_scg(&MlpModel::init(2, 4, 1, seed), &xor_batch(), &opts).unwrap();
    report.final_performance
}

pub fn non_increasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] <= w[0])
}

/// Intersection over union of two half-open sample intervals.
pub fn iou(a: (usize, usize), b: (usize, usize)) -> f64 {
    let inter = a.1.min(b.1).saturating_sub(a.0.max(b.0));
    let union = a.1.max(b.1) - a.0.min(b.0);
    inter as f64 / union as f64
}

pub fn segment_interval(seg: &VowelSegment) -> (usize, usize) {
    (seg.start_sample, seg.end_sample)
}

/// `n` CV clips cycling over consonants and vowels with varied seeds.
pub fn cv_samples(n: usize, seed: u64) -> Vec<CvSample> {
    let profiles = VowelProfiles::default();
    let layout = CvLayout::default();
    (0..n)
        .map(|i| {
            let vowel = VowelLabel::ALL[i % VowelLabel::COUNT];
            let consonant = (i * 7) % vowelrec::phoneme::CONSONANTS.len();
            synth_cv_sample(
                consonant,
                &profiles.profile(vowel),
                &layout,
                16000,
                seed.wrapping_add(i as u64),
            )
            .unwrap()
        })
        .collect()
}

/// Every file below `dir`, relative path plus bytes, in sorted order.
pub fn snapshot_dir(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}
