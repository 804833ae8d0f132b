//! Corpus manifests and word-level error annotations (JSON).

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io_util::write_atomic;
use crate::lexicon::tokenize;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("duplicate utterance id `{0}`")]
    DuplicateId(String),
    #[error("utterance `{id}`: posteriorgram `{path}` does not exist")]
    DanglingPath { id: String, path: PathBuf },
    #[error("annotation for unknown utterance `{0}`")]
    UnknownUtterance(String),
    #[error("utterance `{id}`: {labels} labels for a {words}-word transcript")]
    LabelCount { id: String, labels: usize, words: usize },
    #[error("utterance `{id}`: label value {value} is not 0 or 1")]
    LabelValue { id: String, value: u8 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cohort {
    L1,
    L2,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub id: String,
    /// Posteriorgram path, relative to the manifest's directory unless absolute.
    pub pgram: String,
    pub text: String,
    pub speaker: String,
    pub cohort: Cohort,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub utterances: Vec<Utterance>,
    #[serde(skip)]
    pub root: PathBuf,
}

impl CorpusManifest {
    pub fn pgram_path(&self, utt: &Utterance) -> PathBuf {
        self.root.join(&utt.pgram)
    }

    pub fn get(&self, id: &str) -> Option<&Utterance> {
        self.utterances.iter().find(|u| u.id == id)
    }

    pub fn cohort(&self, cohort: Cohort) -> impl Iterator<Item = &Utterance> {
        self.utterances.iter().filter(move |u| u.cohort == cohort)
    }

    /// Unique ids; every referenced posteriorgram exists.
    pub fn validate(&self) -> Result<(), CorpusError> {
        let mut seen = HashSet::new();
        for u in &self.utterances {
            if !seen.insert(u.id.as_str()) {
                return Err(CorpusError::DuplicateId(u.id.clone()));
            }
            let path = self.pgram_path(u);
            if !path.is_file() {
                return Err(CorpusError::DanglingPath { id: u.id.clone(), path });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorAnnotation {
    pub id: String,
    /// One entry per transcript word; 1 = mispronounced.
    pub labels: Vec<u8>,
}

impl ErrorAnnotation {
    pub fn is_error(&self, k: usize) -> bool {
        self.labels[k] == 1
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
struct AnnotationFile {
    utterances: Vec<ErrorAnnotation>,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io { path: path.into(), source })?;
    serde_json::from_str(&text).map_err(|source| CorpusError::Json { path: path.into(), source })
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), CorpusError> {
    let text = serde_json::to_string_pretty(value).expect("corpus types serialize");
    write_atomic(path, text.as_bytes()).map_err(|source| CorpusError::Io { path: path.into(), source })
}

pub fn load_manifest(path: &Path) -> Result<CorpusManifest, CorpusError> {
    let mut manifest: CorpusManifest = read_json(path)?;
    manifest.root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    manifest.validate()?;
    Ok(manifest)
}

pub fn save_manifest(manifest: &CorpusManifest, path: &Path) -> Result<(), CorpusError> {
    write_json(manifest, path)
}

/// Loads annotations and cross-checks them against the manifest transcripts.
pub fn load_annotations(path: &Path, manifest: &CorpusManifest) -> Result<Vec<ErrorAnnotation>, CorpusError> {
    let file: AnnotationFile = read_json(path)?;
    let texts: HashMap<&str, &str> = manifest.utterances.iter().map(|u| (u.id.as_str(), u.text.as_str())).collect();
    let mut seen = HashSet::new();
    for ann in &file.utterances {
        if !seen.insert(ann.id.as_str()) {
            return Err(CorpusError::DuplicateId(ann.id.clone()));
        }
        let text = texts.get(ann.id.as_str()).ok_or_else(|| CorpusError::UnknownUtterance(ann.id.clone()))?;
        let words = tokenize(text).len();
        if ann.labels.len() != words {
            return Err(CorpusError::LabelCount { id: ann.id.clone(), labels: ann.labels.len(), words });
        }
        if let Some(&value) = ann.labels.iter().find(|&&v| v > 1) {
            return Err(CorpusError::LabelValue { id: ann.id.clone(), value });
        }
    }
    Ok(file.utterances)
}

pub fn save_annotations(annotations: &[ErrorAnnotation], path: &Path) -> Result<(), CorpusError> {
    write_json(&AnnotationFile { utterances: annotations.to_vec() }, path)
}
