//! Word-level pronunciation error detection.
//!
//! For one hypothesis, a word's error probability is 0 when every aligned op
//! touching the word is a Match, and `1 - min π` over its non-matching ops
//! otherwise. Across the top-`n` hypotheses a word is flagged only when every
//! hypothesis agrees (its error probability reaches the threshold in all of
//! them).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::align::{align, AlignParams, Alignment, OpKind};
use crate::decoder::Hypothesis;
use crate::lexicon::CanonicalTranscript;
use crate::phoneme::{PhonemeId, PhonemeInventory};
use crate::pm::{check_alignment, EditTransducer, LikelihoodSeq, PmError};
use crate::scalar::{Real, Score};

#[derive(Debug, Error)]
pub enum DetectError {
    #[error("no hypotheses to score")]
    NoHypotheses,
    #[error("n must lie in 1..={available}, got {n}")]
    BadN { n: usize, available: usize },
    #[error("threshold {0} outside [0, 1]")]
    BadThreshold(f64),
    #[error("PM mode requires a pronunciation model")]
    MissingTransducer,
    #[error("alignment does not match transcript: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Pm(#[from] PmError),
}

/// Ablation mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DetectorMode {
    /// Recognizer treated as certain, no pronunciation model.
    #[serde(rename = "NOLIK")]
    NoLik,
    /// Recognizer posteriors, no pronunciation model.
    #[serde(rename = "LIK")]
    Lik,
    /// Recognizer posteriors marginalized through the pronunciation model.
    #[serde(rename = "PM")]
    Pm,
}

impl DetectorMode {
    pub const ALL: [DetectorMode; 3] = [DetectorMode::NoLik, DetectorMode::Lik, DetectorMode::Pm];

    pub fn name(self) -> &'static str {
        match self {
            DetectorMode::NoLik => "NOLIK",
            DetectorMode::Lik => "LIK",
            DetectorMode::Pm => "PM",
        }
    }
}

impl std::str::FromStr for DetectorMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_uppercase().trim_start_matches("PR-") {
            "NOLIK" => Ok(DetectorMode::NoLik),
            "LIK" => Ok(DetectorMode::Lik),
            "PM" => Ok(DetectorMode::Pm),
            other => Err(format!("unknown mode `{other}` (expected NOLIK, LIK or PM)")),
        }
    }
}

impl std::fmt::Display for DetectorMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Direction of the per-hypothesis threshold test.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum ThresholdRule {
    /// Flag when `p(e) ≥ θ` (and `p(e) > 0`) in every hypothesis.
    #[default]
    AtLeast,
    /// Literal reading: flag when `p(e) < θ` in every hypothesis.
    Below,
}

/// Flag decision for a word from its per-hypothesis error probabilities.
pub fn is_flagged<F: Real>(per_hypothesis: &[F], threshold: F, rule: ThresholdRule) -> bool {
    match rule {
        ThresholdRule::AtLeast => per_hypothesis.iter().all(|&p| p > F::zero() && p >= threshold),
        ThresholdRule::Below => per_hypothesis.iter().all(|&p| p < threshold),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct WordDecision<F: Real = f64> {
    pub word_index: usize,
    pub word: String,
    /// Minimum error probability over the hypotheses used.
    #[serde(rename = "p_error")]
    pub error_prob: F,
    pub per_hypothesis_probs: Vec<F>,
    pub flagged: bool,
}

/// Decisions for every canonical word of one utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct UtteranceDecisions<F: Real = f64> {
    pub id: String,
    pub words: Vec<WordDecision<F>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorConfig<F: Real = f64, S: Score = i32> {
    pub mode: DetectorMode,
    pub threshold: F,
    pub n: usize,
    pub rule: ThresholdRule,
    pub align: AlignParams<S>,
}

impl<F: Real> DetectorConfig<F, i32> {
    pub fn new(mode: DetectorMode, threshold: F, n: usize) -> Self {
        Self { mode, threshold, n, rule: ThresholdRule::AtLeast, align: AlignParams::default() }
    }
}

/// Per-word `p(e_k)` for one hypothesis.
///
/// Deleted canonical phonemes count toward their own word with the model's
/// deletion probability as likelihood (0 outside PM mode). Inserted phonemes
/// count toward the word of the preceding canonical phoneme (word 0 at the
/// start of the sentence). Pause and eos never contribute.
pub fn word_error_probs<F: Real, S>(
    alignment: &Alignment<S>,
    lik: &LikelihoodSeq<F>,
    transcript: &CanonicalTranscript,
    recognized: &[PhonemeId],
    inventory: &PhonemeInventory,
    mode: DetectorMode,
) -> Result<Vec<F>, DetectError> {
    let canonical = transcript.flattened();
    check_alignment(alignment, canonical.len(), recognized.len())
        .map_err(|e| DetectError::Inconsistent(e.to_string()))?;
    if lik.pi.len() != recognized.len() {
        return Err(DetectError::Inconsistent(format!(
            "{} likelihoods for {} recognized phonemes",
            lik.pi.len(),
            recognized.len()
        )));
    }
    let word_of = transcript.word_index_of();
    let words = transcript.word_count();
    let mut min_pi: Vec<Option<F>> = vec![None; words];
    let mut note = |k: usize, pi: F| {
        let slot = &mut min_pi[k];
        *slot = Some(slot.map_or(pi, |m| m.min(pi)));
    };
    let mut current_word = 0;
    for op in &alignment.ops {
        match (op.kind, op.canonical, op.recognized) {
            (OpKind::Match, Some(i), Some(_)) => current_word = word_of[i],
            (OpKind::Substitute, Some(i), Some(j)) => {
                current_word = word_of[i];
                if !inventory.is_silence(canonical[i]) {
                    note(current_word, lik.pi[j]);
                }
            }
            (OpKind::Delete, Some(i), None) => {
                current_word = word_of[i];
                if !inventory.is_silence(canonical[i]) {
                    let pi = match mode {
                        DetectorMode::Pm => lik.deletion(i).unwrap_or(F::zero()),
                        DetectorMode::Lik | DetectorMode::NoLik => F::zero(),
                    };
                    note(current_word, pi);
                }
            }
            (OpKind::Insert, None, Some(j)) => {
                if words > 0 && !inventory.is_silence(recognized[j]) {
                    note(current_word, lik.pi[j]);
                }
            }
            _ => return Err(DetectError::Inconsistent("malformed alignment op".into())),
        }
    }
    Ok(min_pi.into_iter().map(|m| m.map_or(F::zero(), |pi| F::one() - pi)).collect())
}

/// Scores the top-`n` hypotheses and applies the agreement rule per word.
pub fn detect<F: Real, S: Score>(
    hypotheses: &[Hypothesis<F>],
    transcript: &CanonicalTranscript,
    inventory: &PhonemeInventory,
    transducer: Option<&EditTransducer<F>>,
    config: &DetectorConfig<F, S>,
) -> Result<Vec<WordDecision<F>>, DetectError> {
    if hypotheses.is_empty() {
        return Err(DetectError::NoHypotheses);
    }
    if config.n == 0 || config.n > hypotheses.len() {
        return Err(DetectError::BadN { n: config.n, available: hypotheses.len() });
    }
    if !(config.threshold >= F::zero() && config.threshold <= F::one()) {
        return Err(DetectError::BadThreshold(config.threshold.as_f64()));
    }
    let identity;
    let model = match config.mode {
        DetectorMode::Pm => transducer.ok_or(DetectError::MissingTransducer)?,
        DetectorMode::Lik | DetectorMode::NoLik => {
            identity = EditTransducer::identity(inventory);
            &identity
        }
    };
    let canonical = transcript.flattened();
    let mut per_word: Vec<Vec<F>> = vec![Vec::with_capacity(config.n); transcript.word_count()];
    for hyp in &hypotheses[..config.n] {
        let certain;
        let hyp = if config.mode == DetectorMode::NoLik {
            certain = hyp.with_certain_posteriors();
            &certain
        } else {
            hyp
        };
        let alignment = align(canonical, &hyp.seq, &config.align);
        let lik = model.phoneme_likelihoods(hyp, &alignment, canonical)?;
        let probs = word_error_probs(&alignment, &lik, transcript, &hyp.seq, inventory, config.mode)?;
        for (k, p) in probs.into_iter().enumerate() {
            per_word[k].push(p);
        }
    }
    Ok(per_word
        .into_iter()
        .enumerate()
        .map(|(k, probs)| {
            let error_prob = probs.iter().copied().fold(F::one(), F::min);
            WordDecision {
                word_index: k,
                word: transcript.words()[k].0.clone(),
                error_prob,
                flagged: is_flagged(&probs, config.threshold, config.rule),
                per_hypothesis_probs: probs,
            }
        })
        .collect())
}
