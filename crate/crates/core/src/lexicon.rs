//! Pronunciation lexicon and word-segmented canonical transcripts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::phoneme::{InventoryError, PhonemeId, PhonemeInventory, PhonemeSeq};

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("lexicon line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("lexicon line {line}: {source}")]
    Phoneme {
        line: usize,
        #[source]
        source: InventoryError,
    },
    #[error("out-of-vocabulary word `{word}` at position {position}")]
    OutOfVocabulary { word: String, position: usize },
    #[error("reading lexicon: {0}")]
    Io(#[from] std::io::Error),
}

/// Word to pronunciation variants. The first variant of a word is its
/// canonical pronunciation; further variants are alternate native forms.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    entries: BTreeMap<String, Vec<PhonemeSeq>>,
}

impl Lexicon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, word: impl Into<String>, pron: PhonemeSeq) {
        self.entries.entry(word.into().to_lowercase()).or_default().push(pron);
    }

    /// Parses `word<TAB>ph1 ph2 ...` lines; `#` starts a comment line.
    pub fn parse(text: &str, inventory: &PhonemeInventory) -> Result<Self, LexiconError> {
        let mut lex = Lexicon::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (word, phones) = raw.split_once('\t').ok_or_else(|| LexiconError::Malformed {
                line,
                msg: "expected `word<TAB>phonemes`".into(),
            })?;
            let word = word.trim();
            if word.is_empty() || word.chars().any(char::is_whitespace) {
                return Err(LexiconError::Malformed { line, msg: format!("bad word `{word}`") });
            }
            let seq = inventory
                .parse_seq(phones)
                .map_err(|source| LexiconError::Phoneme { line, source })?;
            if seq.is_empty() {
                return Err(LexiconError::Malformed { line, msg: "empty pronunciation".into() });
            }
            lex.insert(word, seq);
        }
        Ok(lex)
    }

    pub fn read(path: &Path, inventory: &PhonemeInventory) -> Result<Self, LexiconError> {
        Self::parse(&std::fs::read_to_string(path)?, inventory)
    }

    pub fn to_text(&self, inventory: &PhonemeInventory) -> String {
        let mut out = String::new();
        for (word, prons) in &self.entries {
            for p in prons {
                let _ = writeln!(out, "{word}\t{}", inventory.format_seq(p));
            }
        }
        out
    }

    pub fn variants(&self, word: &str) -> Option<&[PhonemeSeq]> {
        self.entries.get(&word.to_lowercase()).map(Vec::as_slice)
    }

    pub fn canonical(&self, word: &str) -> Option<&PhonemeSeq> {
        self.variants(word).and_then(|v| v.first())
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// A sentence's canonical phonemes with word boundaries preserved.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CanonicalTranscript {
    words: Vec<(String, PhonemeSeq)>,
    flat: PhonemeSeq,
    word_of: Vec<usize>,
}

impl CanonicalTranscript {
    pub fn from_words(words: Vec<(String, PhonemeSeq)>) -> Self {
        let mut flat = Vec::new();
        let mut word_of = Vec::new();
        for (k, (_, seq)) in words.iter().enumerate() {
            flat.extend_from_slice(seq);
            word_of.extend(std::iter::repeat_n(k, seq.len()));
        }
        Self { words, flat: PhonemeSeq::from_ids_unchecked(flat), word_of }
    }

    pub fn words(&self) -> &[(String, PhonemeSeq)] {
        &self.words
    }

    pub fn word_count(&self) -> usize {
        self.words.len()
    }

    pub fn flattened(&self) -> &PhonemeSeq {
        &self.flat
    }

    /// Word index of each flattened phoneme position.
    pub fn word_index_of(&self) -> &[usize] {
        &self.word_of
    }

    /// Re-splits the flattened sequence by `word_index_of`.
    pub fn resplit(&self) -> Vec<Vec<PhonemeId>> {
        let mut out = vec![Vec::new(); self.words.len()];
        for (&p, &k) in self.flat.iter().zip(&self.word_of) {
            out[k].push(p);
        }
        out
    }
}

/// Splits a transcript line into lowercase words.
pub fn tokenize(line: &str) -> Vec<String> {
    line.split_whitespace().map(str::to_lowercase).collect()
}

/// Looks up every word of `line` and builds its canonical transcript.
pub fn parse_transcript(line: &str, lexicon: &Lexicon) -> Result<CanonicalTranscript, LexiconError> {
    let words = tokenize(line)
        .into_iter()
        .enumerate()
        .map(|(position, word)| match lexicon.canonical(&word) {
            Some(seq) => Ok((word, seq.clone())),
            None => Err(LexiconError::OutOfVocabulary { word, position }),
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CanonicalTranscript::from_words(words))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inv() -> PhonemeInventory {
        PhonemeInventory::new(&["ay", "s", "eh", "d", "ih", "ax", "n", "ah", "f", "pause", "eos", "blank"])
            .unwrap()
    }

    #[test]
    fn i_said() {
        let inv = inv();
        let lex = Lexicon::parse("# test lexicon\ni\tay\nsaid\ts eh d\n", &inv).unwrap();
        let t = parse_transcript("I said", &lex).unwrap();
        assert_eq!(t.word_count(), 2);
        assert_eq!(inv.format_seq(t.flattened()), "ay s eh d");
        assert_eq!(t.word_index_of(), &[0, 1, 1, 1]);
    }

    #[test]
    fn empty_line_gives_empty_transcript() {
        let t = parse_transcript("", &Lexicon::new()).unwrap();
        assert_eq!(t.word_count(), 0);
        assert!(t.flattened().is_empty());
    }

    #[test]
    fn oov_reports_position() {
        match parse_transcript("xyzzy", &Lexicon::new()) {
            Err(LexiconError::OutOfVocabulary { word, position }) => {
                assert_eq!(word, "xyzzy");
                assert_eq!(position, 0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn variants_keep_order() {
        let inv = inv();
        let lex = Lexicon::parse("enough\tih n ah f\nenough\tax n ah f\n", &inv).unwrap();
        let v = lex.variants("enough").unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!(inv.format_seq(lex.canonical("ENOUGH").unwrap()), "ih n ah f");
        let round = Lexicon::parse(&lex.to_text(&inv), &inv).unwrap();
        assert_eq!(round, lex);
    }

    #[test]
    fn malformed_lines() {
        let inv = inv();
        assert!(matches!(Lexicon::parse("said s eh d", &inv), Err(LexiconError::Malformed { line: 1, .. })));
        assert!(matches!(Lexicon::parse("x\tzz", &inv), Err(LexiconError::Phoneme { line: 1, .. })));
        assert!(matches!(Lexicon::parse("x\tblank", &inv), Err(LexiconError::Phoneme { .. })));
    }

    #[test]
    fn resplit_round_trip() {
        let inv = inv();
        let lex = Lexicon::parse("i\tay\nsaid\ts eh d\nenough\tih n ah f\n", &inv).unwrap();
        let t = parse_transcript("enough i said i", &lex).unwrap();
        let split = t.resplit();
        for (k, (_, seq)) in t.words().iter().enumerate() {
            assert_eq!(&split[k], seq.ids());
        }
        assert!(t.word_index_of().windows(2).all(|w| w[0] <= w[1]));
    }
}
