//! End-to-end library pipeline: features, training, evaluation, prediction.

mod common;

use std::collections::HashMap;

use vowelrec::manifest::{split_by_speaker, Manifest, ManifestEntry};
use vowelrec::pipeline::{
    evaluate, evaluate_with, manifest_features, predict_file, train_pipeline, FrontendConfig, PipelineConfig,
    PipelineError, VowelClassifier,
};
use vowelrec::synth::{generate_corpus, CorpusConfig};
use vowelrec::{write_wav, AudioClip, BitDepth, VowelLabel};

fn corpus(dir: &std::path::Path, speakers: usize, consonants: Vec<usize>) -> Manifest {
    let cfg = CorpusConfig {
        speakers,
        seed: 21,
        consonants,
        ..Default::default()
    };
    generate_corpus(&cfg, dir).unwrap()
}

fn fast_config() -> PipelineConfig {
    let mut pc = PipelineConfig::default();
    pc.train.max_epochs = 60;
    pc
}

/// Looks the feature vector up in a table built from the ground truth.
struct Oracle {
    table: HashMap<Vec<u64>, VowelLabel>,
}

fn key(f: &[f64]) -> Vec<u64> {
    f.iter().map(|v| v.to_bits()).collect()
}

impl VowelClassifier for Oracle {
    fn input_len(&self) -> usize {
        50
    }

    fn classify(&self, features: &[f64]) -> Result<VowelLabel, PipelineError> {
        Ok(self.table[&key(features)])
    }
}

#[test]
fn oracle_classifier_scores_perfectly() {
    let dir = tempfile::tempdir().unwrap();
    let m = corpus(dir.path(), 1, vec![0, 4, 12]);
    let cfg = FrontendConfig::default();
    let table = m
        .entries
        .iter()
        .zip(manifest_features(&m, &cfg))
        .map(|(e, f)| (key(&f.unwrap().values), e.vowel))
        .collect();
    let report = evaluate_with(&Oracle { table }, &m, &cfg).unwrap();
    for v in VowelLabel::ALL {
        assert_eq!(report.confusion.row_total(v), 3);
        assert_eq!(report.per_class_percent[v.index()], Some(100.0));
    }
    assert_eq!(report.average_percent, Some(100.0));
}

#[test]
fn train_and_predict_share_features() {
    let dir = tempfile::tempdir().unwrap();
    let m = corpus(dir.path(), 2, vec![1, 8]);
    let (train, test) = split_by_speaker(&m, &["spk02".to_string()]).unwrap();
    let (model, rep) = train_pipeline(&train, &fast_config()).unwrap();
    assert_eq!(rep.examples, 12);
    assert_eq!(rep.skipped, 0);

    // prediction goes through the same front end as evaluation
    let report = evaluate(&model, &test).unwrap();
    let mut correct = 0;
    for e in &test.entries {
        let p = predict_file(&model, test.resolve(e)).unwrap();
        assert_eq!(p.scores.len(), 6);
        correct += usize::from(p.label == e.vowel);
    }
    let diag: u64 = VowelLabel::ALL
        .iter()
        .map(|&v| report.confusion.counts[v.index()][v.index()])
        .sum();
    assert_eq!(diag as usize, correct);
    for v in VowelLabel::ALL {
        assert_eq!(report.confusion.row_total(v), 2);
    }
}

#[test]
fn training_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let m = corpus(dir.path(), 1, vec![2, 6, 15]);
    let (a, ra) = train_pipeline(&m, &fast_config()).unwrap();
    let (b, rb) = train_pipeline(&m, &fast_config()).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    assert_eq!(ra, rb);
}

#[test]
fn silence_only_manifest_cannot_train() {
    let dir = tempfile::tempdir().unwrap();
    let silence = AudioClip::new(vec![0.0; 16000], 16000).unwrap();
    let entries = VowelLabel::ALL
        .iter()
        .map(|&v| {
            let path = format!("quiet_{}.wav", v.ascii());
            write_wav(&silence, dir.path().join(&path), BitDepth::Pcm16).unwrap();
            ManifestEntry {
                path,
                speaker: "s1".into(),
                consonant: "b".into(),
                vowel: v,
            }
        })
        .collect();
    let m = Manifest::new(entries, dir.path()).unwrap();
    match train_pipeline(&m, &fast_config()) {
        Err(PipelineError::NoTrainableExamples { skipped }) => assert_eq!(skipped, 6),
        other => panic!("expected NoTrainableExamples, got {other:?}"),
    }
}

#[test]
fn unsegmentable_test_entries_count_as_errors() {
    let dir = tempfile::tempdir().unwrap();
    let mut m = corpus(dir.path(), 1, vec![3]);
    let (model, _) = train_pipeline(&m, &fast_config()).unwrap();
    let silence = AudioClip::new(vec![0.0; 16000], 16000).unwrap();
    write_wav(&silence, dir.path().join("quiet.wav"), BitDepth::Pcm16).unwrap();
    m.entries.push(ManifestEntry {
        path: "quiet.wav".into(),
        speaker: "spk01".into(),
        consonant: "b".into(),
        vowel: VowelLabel::A,
    });
    let report = evaluate(&model, &m).unwrap();
    assert_eq!(report.confusion.unclassified[VowelLabel::A.index()], 1);
    assert_eq!(report.confusion.row_total(VowelLabel::A), 2);
    assert!(report.per_class_percent[0].unwrap() <= 50.0);
}
