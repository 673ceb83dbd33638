//! Labeled-example index: a `path,speaker,consonant,vowel` CSV plus an
//! optional JSON metadata sidecar.
//!
//! Relative paths in the CSV resolve against the manifest's own directory.

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::phoneme::VowelLabel;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("I/O failure on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest parse error: {0}")]
    Csv(#[from] csv::Error),
    #[error("metadata parse error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("duplicate path in manifest: {0}")]
    DuplicatePath(String),
    #[error("unknown speaker {0:?}")]
    UnknownSpeaker(String),
    #[error("split leaves the {0} side empty")]
    EmptySplit(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub speaker: String,
    pub consonant: String,
    pub vowel: VowelLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusMetadata {
    pub sample_rate: u32,
    pub duration_s: f64,
    pub seed: u64,
    pub generator_version: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
    /// Directory relative entry paths are resolved against.
    pub base_dir: PathBuf,
}

fn io_err(path: &Path, source: std::io::Error) -> ManifestError {
    ManifestError::Io {
        path: path.display().to_string(),
        source,
    }
}

impl Manifest {
    pub fn new(entries: Vec<ManifestEntry>, base_dir: impl Into<PathBuf>) -> Result<Self, ManifestError> {
        let mut seen = HashSet::new();
        for e in &entries {
            if !seen.insert(e.path.as_str()) {
                return Err(ManifestError::DuplicatePath(e.path.clone()));
            }
        }
        Ok(Self {
            entries,
            base_dir: base_dir.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        let p = Path::new(&entry.path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Speaker ids in sorted order.
    pub fn speakers(&self) -> Vec<String> {
        self.entries
            .iter()
            .map(|e| e.speaker.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, ManifestError> {
        let path = path.as_ref();
        let text = fs::read(path).map_err(|e| io_err(path, e))?;
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_slice());
        let entries = reader.deserialize().collect::<Result<Vec<ManifestEntry>, _>>()?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::new(entries, base)
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, ManifestError> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        for e in &self.entries {
            w.serialize(e)?;
        }
        if self.entries.is_empty() {
            w.write_record(["path", "speaker", "consonant", "vowel"])?;
        }
        w.into_inner().map_err(|e| ManifestError::Io {
            path: "<memory>".into(),
            source: e.into_error(),
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), ManifestError> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()?).map_err(|e| io_err(path, e))
    }

    /// Keeps only entries from the listed speakers, preserving order.
    pub fn filter_speakers(&self, speakers: &[String]) -> Result<Self, ManifestError> {
        let known: BTreeSet<&str> = self.entries.iter().map(|e| e.speaker.as_str()).collect();
        if let Some(s) = speakers.iter().find(|s| !known.contains(s.as_str())) {
            return Err(ManifestError::UnknownSpeaker(s.clone()));
        }
        Ok(Self {
            entries: self
                .entries
                .iter()
                .filter(|e| speakers.contains(&e.speaker))
                .cloned()
                .collect(),
            base_dir: self.base_dir.clone(),
        })
    }
}

/// Partitions by speaker: `(train, test)` with the test side holding exactly
/// the entries of `test_speakers`.
pub fn split_by_speaker(manifest: &Manifest, test_speakers: &[String]) -> Result<(Manifest, Manifest), ManifestError> {
    if test_speakers.is_empty() {
        return Err(ManifestError::EmptySplit("test"));
    }
    let test = manifest.filter_speakers(test_speakers)?;
    let train = Manifest {
        entries: manifest
            .entries
            .iter()
            .filter(|e| !test_speakers.contains(&e.speaker))
            .cloned()
            .collect(),
        base_dir: manifest.base_dir.clone(),
    };
    if train.is_empty() {
        return Err(ManifestError::EmptySplit("train"));
    }
    if test.is_empty() {
        return Err(ManifestError::EmptySplit("test"));
    }
    Ok((train, test))
}

/// Default held-out set: the last two speakers in sorted order, or the last one
/// if there are only two.
pub fn default_test_speakers(manifest: &Manifest) -> Vec<String> {
    let speakers = manifest.speakers();
    let hold = if speakers.len() > 2 { 2 } else { 1 };
    speakers[speakers.len().saturating_sub(hold)..].to_vec()
}

pub fn sidecar_path(manifest_path: &Path) -> PathBuf {
    manifest_path.with_extension("json")
}

pub fn write_metadata(meta: &CorpusMetadata, path: impl AsRef<Path>) -> Result<(), ManifestError> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(meta)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn read_metadata(path: impl AsRef<Path>) -> Result<CorpusMetadata, ManifestError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
