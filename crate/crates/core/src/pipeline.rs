//! End-to-end training and evaluation over a manifest.
//!
//! Training and evaluation both go through [`clip_features`], so a file
//! yields the same feature vector no matter which path reads it.

use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{read_wav, AudioClip, AudioError};
use crate::manifest::{Manifest, ManifestError};
use crate::mfcc::{mfcc, pool_features, FeatureVector, MfccConfig, MfccError, Pooling};
use crate::mlp::{Batch, MlpError, MlpModel};
use crate::phoneme::VowelLabel;
use crate::scg::{train_scg, TrainError, TrainOptions, TrainReport};
use crate::segment::{extract_vowel, SegmentError, SegmentParams, VowelSegment};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Segment(#[from] SegmentError),
    #[error(transparent)]
    Mfcc(#[from] MfccError),
    #[error(transparent)]
    Model(#[from] MlpError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error("no trainable examples: all {skipped} entries were skipped")]
    NoTrainableExamples { skipped: usize },
    #[error("features have {features} values but the model expects {model}")]
    FeatureDimensionMismatch { model: usize, features: usize },
}

impl PipelineError {
    /// Whether the entry is unusable because no vowel could be located.
    pub fn is_segmentation_failure(&self) -> bool {
        matches!(
            self,
            PipelineError::Segment(SegmentError::NoVowelFound | SegmentError::DegenerateThreshold)
        )
    }
}

/// Everything that determines the feature vector of a clip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct FrontendConfig {
    pub segment: SegmentParams,
    pub mfcc: MfccConfig,
    pub pooling: Pooling,
}

impl FrontendConfig {
    pub fn feature_len(&self) -> usize {
        self.mfcc.n_coeffs
    }
}

/// Segment, MFCC, pool.
pub fn clip_features(clip: &AudioClip, cfg: &FrontendConfig) -> Result<(FeatureVector, VowelSegment), PipelineError> {
    let segment = extract_vowel(clip, &cfg.segment)?;
    let matrix = mfcc(clip, &segment, &cfg.mfcc)?;
    Ok((pool_features(&matrix, cfg.pooling)?, segment))
}

pub fn file_features(
    path: impl AsRef<Path>,
    cfg: &FrontendConfig,
) -> Result<(FeatureVector, VowelSegment), PipelineError> {
    clip_features(&read_wav(path)?, cfg)
}

/// Per-entry feature extraction, in manifest order.
pub fn manifest_features(manifest: &Manifest, cfg: &FrontendConfig) -> Vec<Result<FeatureVector, PipelineError>> {
    manifest
        .entries
        .par_iter()
        .map(|e| file_features(manifest.resolve(e), cfg).map(|(f, _)| f))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub frontend: FrontendConfig,
    pub hidden: usize,
    pub train: TrainOptions,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            frontend: FrontendConfig::default(),
            hidden: 50,
            train: TrainOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineTrainReport {
    pub train: TrainReport,
    pub examples: usize,
    pub skipped: usize,
}

/// Builds the labeled training batch, dropping entries with no detectable vowel.
pub fn training_batch(manifest: &Manifest, cfg: &FrontendConfig) -> Result<(Batch, usize), PipelineError> {
    let mut batch = Batch::default();
    let mut skipped = 0;
    for (entry, result) in manifest.entries.iter().zip(manifest_features(manifest, cfg)) {
        match result {
            Ok(f) => batch.push(f.values, entry.vowel.one_hot().to_vec()),
            Err(e) if e.is_segmentation_failure() => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    if batch.is_empty() {
        return Err(PipelineError::NoTrainableExamples { skipped });
    }
    Ok((batch, skipped))
}

pub fn train_pipeline(
    manifest: &Manifest,
    cfg: &PipelineConfig,
) -> Result<(MlpModel, PipelineTrainReport), PipelineError> {
    let (batch, skipped) = training_batch(manifest, &cfg.frontend)?;
    let init = MlpModel::init(
        cfg.frontend.feature_len(),
        cfg.hidden,
        VowelLabel::COUNT,
        cfg.train.seed,
    );
    let (mut model, train) = train_scg(&init, &batch, &cfg.train)?;
    model.config.frontend = Some(cfg.frontend.clone());
    Ok((
        model,
        PipelineTrainReport {
            train,
            examples: batch.len(),
            skipped,
        },
    ))
}

/// Rows are the true vowel, columns the predicted vowel. Entries that could
/// not be classified are tallied per true vowel in `unclassified`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 6]; 6],
    pub unclassified: [u64; 6],
}

impl ConfusionMatrix {
    pub fn record(&mut self, truth: VowelLabel, predicted: VowelLabel) {
        self.counts[truth.index()][predicted.index()] += 1;
    }

    pub fn record_failure(&mut self, truth: VowelLabel) {
        self.unclassified[truth.index()] += 1;
    }

    pub fn row_total(&self, truth: VowelLabel) -> u64 {
        self.counts[truth.index()].iter().sum::<u64>() + self.unclassified[truth.index()]
    }

    pub fn total(&self) -> u64 {
        VowelLabel::ALL.iter().map(|&v| self.row_total(v)).sum()
    }

    /// `100 * correct / row total`, or `None` for a vowel with no examples.
    pub fn percent(&self, truth: VowelLabel) -> Option<f64> {
        let total = self.row_total(truth);
        (total > 0).then(|| 100.0 * self.counts[truth.index()][truth.index()] as f64 / total as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub labels: Vec<VowelLabel>,
    pub confusion: ConfusionMatrix,
    pub per_class_percent: Vec<Option<f64>>,
    pub average_percent: Option<f64>,
}

impl EvalReport {
    pub fn from_confusion(confusion: ConfusionMatrix) -> Self {
        let per_class_percent: Vec<Option<f64>> = VowelLabel::ALL.iter().map(|&v| confusion.percent(v)).collect();
        let defined: Vec<f64> = per_class_percent.iter().flatten().copied().collect();
        let average_percent = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
        Self {
            labels: VowelLabel::ALL.to_vec(),
            confusion,
            per_class_percent,
            average_percent,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<8}{:>20}", "Vowel", "Recognition Percent")?;
        for (v, p) in self.labels.iter().zip(&self.per_class_percent) {
            match p {
                Some(p) => writeln!(f, "{:<8}{:>20.2}", v.symbol(), p)?,
                None => writeln!(f, "{:<8}{:>20}", v.symbol(), "n/a")?,
            }
        }
        match self.average_percent {
            Some(a) => writeln!(f, "{:<8}{:>20.2}", "Average", a),
            None => writeln!(f, "{:<8}{:>20}", "Average", "n/a"),
        }
    }
}

/// Reference recognition percentages for the real recordings, in label order.
/// Kept for side-by-side reporting only.
pub const REFERENCE_PERCENT: [f64; 6] = [80.0, 96.0, 96.0, 100.0, 100.0, 92.0];

/// Anything that maps a clip's feature vector to a vowel.
pub trait VowelClassifier {
    fn input_len(&self) -> usize;
    fn classify(&self, features: &[f64]) -> Result<VowelLabel, PipelineError>;
}

impl VowelClassifier for MlpModel {
    fn input_len(&self) -> usize {
        self.n_inputs
    }

    fn classify(&self, features: &[f64]) -> Result<VowelLabel, PipelineError> {
        Ok(self.predict(features)?.0)
    }
}

/// Scores every entry; entries whose vowel cannot be located count against
/// their true class.
pub fn evaluate_with<C: VowelClassifier + Sync>(
    classifier: &C,
    manifest: &Manifest,
    cfg: &FrontendConfig,
) -> Result<EvalReport, PipelineError> {
    if classifier.input_len() != cfg.feature_len() {
        return Err(PipelineError::FeatureDimensionMismatch {
            model: classifier.input_len(),
            features: cfg.feature_len(),
        });
    }
    let mut confusion = ConfusionMatrix::default();
    for (entry, result) in manifest.entries.iter().zip(manifest_features(manifest, cfg)) {
        match result {
            Ok(f) => confusion.record(entry.vowel, classifier.classify(&f.values)?),
            Err(e) if e.is_segmentation_failure() => confusion.record_failure(entry.vowel),
            Err(e) => return Err(e),
        }
    }
    Ok(EvalReport::from_confusion(confusion))
}

/// The model's stored front-end configuration, or the defaults if it has none.
pub fn model_frontend(model: &MlpModel) -> FrontendConfig {
    model.config.frontend.clone().unwrap_or_default()
}

pub fn evaluate(model: &MlpModel, manifest: &Manifest) -> Result<EvalReport, PipelineError> {
    evaluate_with(model, manifest, &model_frontend(model))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: VowelLabel,
    pub scores: Vec<f64>,
    pub segment: VowelSegment,
}

impl Prediction {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "label": self.label,
            "labels": VowelLabel::ALL,
            "scores": self.scores,
            "segment": self.segment.to_json(),
        })
    }
}

pub fn predict_file(model: &MlpModel, path: impl AsRef<Path>) -> Result<Prediction, PipelineError> {
    let cfg = model_frontend(model);
    let (features, segment) = file_features(path, &cfg)?;
    if features.values.len() != model.n_inputs {
        return Err(PipelineError::FeatureDimensionMismatch {
            model: model.n_inputs,
            features: features.values.len(),
        });
    }
    let (label, scores) = model.predict(&features.values)?;
    Ok(Prediction { label, scores, segment })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percent_and_average() {
        let mut c = ConfusionMatrix::default();
        for _ in 0..4 {
            c.record(VowelLabel::A, VowelLabel::A);
        }
        c.record(VowelLabel::A, VowelLabel::O);
        c.record(VowelLabel::I, VowelLabel::I);
        c.record_failure(VowelLabel::I);
        let r = EvalReport::from_confusion(c);
        assert_eq!(r.per_class_percent[0], Some(80.0));
        assert_eq!(r.per_class_percent[1], Some(50.0));
        assert_eq!(r.per_class_percent[2], None);
        assert_eq!(r.average_percent, Some(65.0));
        assert_eq!(r.confusion.total(), 7);
        let text = r.to_string();
        assert!(text.contains("n/a"));
        assert!(text.contains("Average"));
    }

    #[test]
    fn reference_average() {
        let avg = REFERENCE_PERCENT.iter().sum::<f64>() / 6.0;
        assert!((avg - 94.0).abs() < 1e-12);
    }

    #[test]
    fn empty_report_has_no_average() {
        let r = EvalReport::from_confusion(ConfusionMatrix::default());
        assert_eq!(r.average_percent, None);
    }
}
