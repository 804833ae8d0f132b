//! Phoneme inventory and phoneme sequences.

use std::collections::HashMap;
use std::fmt;
use std::ops::Deref;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const BLANK: &str = "blank";
pub const PAUSE: &str = "pause";
pub const EOS: &str = "eos";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum InventoryError {
    #[error("duplicate phoneme label `{0}`")]
    Duplicate(String),
    #[error("missing reserved label `{0}`")]
    MissingReserved(&'static str),
    #[error("invalid phoneme label `{0}` (empty or contains whitespace)")]
    InvalidLabel(String),
    #[error("unknown phoneme label `{0}`")]
    UnknownLabel(String),
    #[error("blank may not appear in a phoneme sequence")]
    BlankInSequence,
}

/// Index of a phoneme within a [`PhonemeInventory`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PhonemeId(pub u32);

impl PhonemeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for PhonemeId {
    fn from(i: usize) -> Self {
        PhonemeId(i as u32)
    }
}

/// The closed phoneme set. `blank` always occupies the last index, so the
/// non-blank phonemes are exactly `0..size()`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhonemeInventory {
    symbols: Vec<String>,
    index: HashMap<String, PhonemeId>,
    pause: PhonemeId,
    eos: PhonemeId,
}

impl PhonemeInventory {
    /// Builds an inventory, moving `blank` to the last index. All other labels
    /// keep their relative order.
    pub fn new<S: AsRef<str>>(labels: &[S]) -> Result<Self, InventoryError> {
        let mut symbols = Vec::with_capacity(labels.len());
        let mut seen = HashMap::new();
        for label in labels {
            let label = label.as_ref();
            if label.is_empty() || label.chars().any(char::is_whitespace) {
                return Err(InventoryError::InvalidLabel(label.to_string()));
            }
            if seen.insert(label.to_string(), ()).is_some() {
                return Err(InventoryError::Duplicate(label.to_string()));
            }
            if label != BLANK {
                symbols.push(label.to_string());
            }
        }
        for reserved in [PAUSE, EOS, BLANK] {
            if !seen.contains_key(reserved) {
                return Err(InventoryError::MissingReserved(reserved));
            }
        }
        symbols.push(BLANK.to_string());
        let index: HashMap<String, PhonemeId> = symbols
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), PhonemeId::from(i)))
            .collect();
        let pause = index[PAUSE];
        let eos = index[EOS];
        Ok(Self { symbols, index, pause, eos })
    }

    /// Number of phonemes excluding blank (`l_s`).
    pub fn size(&self) -> usize {
        self.symbols.len() - 1
    }

    /// Posteriorgram column count (`l_s + 1`).
    pub fn width(&self) -> usize {
        self.symbols.len()
    }

    pub fn blank(&self) -> PhonemeId {
        PhonemeId::from(self.symbols.len() - 1)
    }

    pub fn pause(&self) -> PhonemeId {
        self.pause
    }

    pub fn eos(&self) -> PhonemeId {
        self.eos
    }

    /// Pause and eos carry no lexical content.
    pub fn is_silence(&self, id: PhonemeId) -> bool {
        id == self.pause || id == self.eos
    }

    pub fn labels(&self) -> &[String] {
        &self.symbols
    }

    pub fn id(&self, label: &str) -> Option<PhonemeId> {
        self.index.get(label).copied()
    }

    pub fn label(&self, id: PhonemeId) -> &str {
        &self.symbols[id.index()]
    }

    /// Non-blank phoneme ids in index order.
    pub fn phonemes(&self) -> impl Iterator<Item = PhonemeId> {
        (0..self.size()).map(PhonemeId::from)
    }

    /// Parses whitespace-separated labels into a blank-free sequence.
    pub fn parse_seq(&self, text: &str) -> Result<PhonemeSeq, InventoryError> {
        let ids = text
            .split_whitespace()
            .map(|l| self.id(l).ok_or_else(|| InventoryError::UnknownLabel(l.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        PhonemeSeq::new(ids, self)
    }

    pub fn format_seq(&self, seq: &[PhonemeId]) -> String {
        seq.iter().map(|&p| self.label(p)).collect::<Vec<_>>().join(" ")
    }

    /// Stable checksum of the ordered label list.
    pub fn hash(&self) -> String {
        label_hash(&self.symbols)
    }
}

/// Checksum over an ordered label list, as stored in posteriorgram and model files.
pub fn label_hash<S: AsRef<str>>(labels: &[S]) -> String {
    let mut hasher = Sha256::new();
    for l in labels {
        hasher.update(l.as_ref().as_bytes());
        hasher.update([0u8]);
    }
    hasher
        .finalize()
        .iter()
        .take(8)
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// A blank-free phoneme sequence.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PhonemeSeq(Vec<PhonemeId>);

impl PhonemeSeq {
    pub fn new(ids: Vec<PhonemeId>, inventory: &PhonemeInventory) -> Result<Self, InventoryError> {
        for &id in &ids {
            if id.index() >= inventory.width() {
                return Err(InventoryError::UnknownLabel(format!("#{}", id.0)));
            }
            if id == inventory.blank() {
                return Err(InventoryError::BlankInSequence);
            }
        }
        Ok(Self(ids))
    }

    /// Wraps ids that are known to be blank-free (decoder output, internal use).
    pub(crate) fn from_ids_unchecked(ids: Vec<PhonemeId>) -> Self {
        Self(ids)
    }

    pub fn ids(&self) -> &[PhonemeId] {
        &self.0
    }

    pub fn into_ids(self) -> Vec<PhonemeId> {
        self.0
    }
}

impl Deref for PhonemeSeq {
    type Target = [PhonemeId];

    fn deref(&self) -> &[PhonemeId] {
        &self.0
    }
}

impl fmt::Display for PhonemeSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|p| p.0.to_string()).collect();
        write!(f, "/{}/", parts.join(" "))
    }
}
