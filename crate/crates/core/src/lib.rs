//! Vowel recognition for consonant-vowel recordings.
//!
//! The pipeline locates the vowel in each clip by thresholding short-window
//! RMS at twice the leading-silence noise ceiling, turns the vowel into
//! mean-pooled MFCCs (20 ms / 10 ms frames, 100 mel bands, 50 coefficients),
//! and classifies with a 50-unit sigmoid MLP trained by scaled conjugate
//! gradient on a weight-regularized MSE. [`synth`] generates a formant-synthesis
//! corpus with the same layout as the real recordings.

pub mod audio;
pub mod manifest;
pub mod mfcc;
pub mod mlp;
pub mod phoneme;
pub mod pipeline;
pub mod scg;
pub mod segment;
pub mod synth;

pub use audio::{read_wav, write_wav, AudioClip, BitDepth};
pub use manifest::{split_by_speaker, Manifest, ManifestEntry};
pub use mfcc::{FeatureVector, MfccConfig, MfccMatrix};
pub use mlp::MlpModel;
pub use phoneme::VowelLabel;
pub use pipeline::{evaluate, predict_file, train_pipeline, EvalReport, FrontendConfig, PipelineConfig};
pub use scg::{train_scg, TrainOptions, TrainReport};
pub use segment::{extract_vowel, SegmentParams, VowelSegment};
