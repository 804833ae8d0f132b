//! N-best CTC prefix beam search over posteriorgrams.
//!
//! Each surviving prefix keeps a (blank-ending, non-blank-ending) pair of log
//! path sums. Beam pruning ranks prefixes by total log probability and breaks
//! ties by lexicographic phoneme order, so decoding is fully deterministic.
//!
//! Every output phoneme carries an emission frame and a per-phoneme posterior
//! distribution: the frame-level row at the emission frame with blank removed
//! and the rest renormalized (`posterior=emit-frame`). The emission frame of a
//! phoneme is the frame, among those where the prefix received non-blank mass
//! for it, with the highest frame probability of that phoneme.

pub mod oracle;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pgram::Posteriorgram;
use crate::phoneme::{PhonemeId, PhonemeSeq};
use crate::scalar::{floored_ln, log_add, log_sum_exp, Real};

pub use oracle::oracle_decode;

#[derive(Debug, Error, PartialEq)]
pub enum DecodeError {
    #[error("invalid beam parameters: {0}")]
    InvalidParams(String),
    #[error("emission frames must be strictly increasing (position {0})")]
    NonIncreasingFrames(usize),
    #[error("emission frame {frame} outside [0, {frames})")]
    FrameOutOfRange { frame: usize, frames: usize },
    #[error("{frames} emission frames for a {phonemes}-phoneme sequence")]
    LengthMismatch { frames: usize, phonemes: usize },
    #[error("instance too large to enumerate: width^T = {0:.3e} exceeds 1e7")]
    TooLarge(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamParams {
    pub beam_width: usize,
    pub n_best: usize,
    /// Non-blank labels whose normalized frame probability falls below this
    /// are not considered as prefix extensions at that frame.
    pub min_phoneme_prob: f64,
}

impl Default for BeamParams {
    fn default() -> Self {
        Self { beam_width: 16, n_best: 4, min_phoneme_prob: 1e-6 }
    }
}

impl BeamParams {
    pub fn validate(&self) -> Result<(), DecodeError> {
        if self.beam_width == 0 || self.n_best == 0 {
            return Err(DecodeError::InvalidParams("beam_width and n_best must be positive".into()));
        }
        if self.n_best > self.beam_width {
            return Err(DecodeError::InvalidParams(format!(
                "n_best {} exceeds beam_width {}",
                self.n_best, self.beam_width
            )));
        }
        if !(0.0..1.0).contains(&self.min_phoneme_prob) {
            return Err(DecodeError::InvalidParams("min_phoneme_prob must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// One decoded phoneme sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Hypothesis<F: Real = f64> {
    pub seq: PhonemeSeq,
    /// Log probability renormalized over the final beam.
    pub log_weight: F,
    /// Raw log path sum before renormalization.
    pub log_path_sum: F,
    pub emit_frames: Vec<usize>,
    /// Per output phoneme, a distribution over the non-blank inventory.
    pub pos_posteriors: Vec<Vec<F>>,
}

impl<F: Real> Hypothesis<F> {
    pub fn weight(&self) -> F {
        self.log_weight.exp()
    }

    /// The same hypothesis with every posterior made one-hot on the decoded phoneme.
    pub fn with_certain_posteriors(&self) -> Self {
        let width = self.pos_posteriors.first().map_or(0, Vec::len);
        let pos_posteriors = self
            .seq
            .iter()
            .map(|p| {
                let mut row = vec![F::zero(); width];
                row[p.index()] = F::one();
                row
            })
            .collect();
        Self { pos_posteriors, ..self.clone() }
    }

    /// A hypothesis that is a single certain path (no recognizer uncertainty).
    pub fn certain(seq: PhonemeSeq, inventory_size: usize) -> Self {
        let pos_posteriors = seq
            .iter()
            .map(|p| {
                let mut row = vec![F::zero(); inventory_size];
                row[p.index()] = F::one();
                row
            })
            .collect();
        Self {
            emit_frames: (0..seq.len()).collect(),
            seq,
            log_weight: F::zero(),
            log_path_sum: F::zero(),
            pos_posteriors,
        }
    }
}

#[derive(Debug, Clone)]
struct Prefix<F> {
    blank: F,
    non_blank: F,
    frames: Vec<usize>,
    /// Frame probability of the last phoneme at its recorded emission frame.
    peak: F,
    recorded: bool,
}

impl<F: Real> Prefix<F> {
    fn empty() -> Self {
        Self {
            blank: F::neg_infinity(),
            non_blank: F::neg_infinity(),
            frames: Vec::new(),
            peak: F::neg_infinity(),
            recorded: false,
        }
    }

    fn total(&self) -> F {
        log_add(self.blank, self.non_blank)
    }

    /// Adopts `frames`/`peak` when they describe a stronger (or equally strong
    /// but earlier) emission of the last phoneme.
    fn offer(&mut self, frames: &[usize], peak: F) {
        let take = !self.recorded
            || peak > self.peak
            || (peak == self.peak && frames.last() < self.frames.last());
        if take {
            self.frames = frames.to_vec();
            self.peak = peak;
            self.recorded = true;
        }
    }
}

/// Decodes the `n_best` most probable collapsed phoneme sequences, best first.
pub fn beam_decode<F: Real>(pgram: &Posteriorgram<F>, params: &BeamParams) -> Result<Vec<Hypothesis<F>>, DecodeError> {
    params.validate()?;
    let width = pgram.width();
    let blank = width - 1;
    if pgram.num_frames() == 0 {
        return Ok(vec![Hypothesis {
            seq: PhonemeSeq::default(),
            log_weight: F::zero(),
            log_path_sum: F::zero(),
            emit_frames: Vec::new(),
            pos_posteriors: Vec::new(),
        }]);
    }
    let min_prob = F::from_f64_lossy(params.min_phoneme_prob);

    let mut beam: Vec<(Vec<PhonemeId>, Prefix<F>)> = vec![(
        Vec::new(),
        Prefix { blank: F::zero(), ..Prefix::empty() },
    )];

    for t in 0..pgram.num_frames() {
        let row = pgram.row(t);
        let sum = pgram.row_sum(t);
        let probs: Vec<F> = row.iter().map(|&v| v / sum).collect();
        let logp: Vec<F> = probs.iter().map(|&p| floored_ln(p)).collect();
        let mut next: BTreeMap<Vec<PhonemeId>, Prefix<F>> = BTreeMap::new();

        for (prefix, entry) in &beam {
            let total = entry.total();
            let last = prefix.last().copied();

            if logp[blank] > F::neg_infinity() {
                let slot = next.entry(prefix.clone()).or_insert_with(Prefix::empty);
                slot.blank = log_add(slot.blank, total + logp[blank]);
                slot.offer(&entry.frames, entry.peak);
            }

            if let Some(last) = last {
                let lp = logp[last.index()];
                let mass = entry.non_blank + lp;
                if mass > F::neg_infinity() {
                    let slot = next.entry(prefix.clone()).or_insert_with(Prefix::empty);
                    slot.non_blank = log_add(slot.non_blank, mass);
                    let p = probs[last.index()];
                    if p > entry.peak {
                        let mut frames = entry.frames.clone();
                        *frames.last_mut().expect("non-empty prefix has frames") = t;
                        slot.offer(&frames, p);
                    } else {
                        slot.offer(&entry.frames, entry.peak);
                    }
                }
            }

            for c in 0..blank {
                if probs[c] < min_prob || logp[c] == F::neg_infinity() {
                    continue;
                }
                let id = PhonemeId::from(c);
                let base = if last == Some(id) { entry.blank } else { total };
                let mass = base + logp[c];
                if mass == F::neg_infinity() {
                    continue;
                }
                let mut extended = prefix.clone();
                extended.push(id);
                let mut frames = entry.frames.clone();
                frames.push(t);
                let slot = next.entry(extended).or_insert_with(Prefix::empty);
                slot.non_blank = log_add(slot.non_blank, mass);
                slot.offer(&frames, probs[c]);
            }
        }

        beam = prune(next, params.beam_width);
    }

    let norm = log_sum_exp(beam.iter().map(|(_, e)| e.total()));
    beam.truncate(params.n_best);
    beam.into_iter()
        .map(|(ids, entry)| {
            let seq = PhonemeSeq::from_ids_unchecked(ids);
            let pos_posteriors = extract_pos_posteriors(pgram, &seq, &entry.frames)?;
            let log_path_sum = entry.total();
            Ok(Hypothesis {
                seq,
                log_weight: (log_path_sum - norm).min(F::zero()),
                log_path_sum,
                emit_frames: entry.frames,
                pos_posteriors,
            })
        })
        .collect()
}

fn prune<F: Real>(next: BTreeMap<Vec<PhonemeId>, Prefix<F>>, beam_width: usize) -> Vec<(Vec<PhonemeId>, Prefix<F>)> {
    let mut ranked: Vec<(Vec<PhonemeId>, Prefix<F>)> = next.into_iter().collect();
    // BTreeMap order is lexicographic; a stable sort keeps it among equal scores.
    ranked.sort_by(|a, b| b.1.total().partial_cmp(&a.1.total()).unwrap_or(std::cmp::Ordering::Equal));
    ranked.truncate(beam_width);
    ranked
}

/// Per-phoneme distributions: the posteriorgram row at each emission frame,
/// blank mass removed and the remainder renormalized.
pub fn extract_pos_posteriors<F: Real>(
    pgram: &Posteriorgram<F>,
    seq: &[PhonemeId],
    emit_frames: &[usize],
) -> Result<Vec<Vec<F>>, DecodeError> {
    if seq.len() != emit_frames.len() {
        return Err(DecodeError::LengthMismatch { frames: emit_frames.len(), phonemes: seq.len() });
    }
    let frames = pgram.num_frames();
    for (i, &f) in emit_frames.iter().enumerate() {
        if f >= frames {
            return Err(DecodeError::FrameOutOfRange { frame: f, frames });
        }
        if i > 0 && f <= emit_frames[i - 1] {
            return Err(DecodeError::NonIncreasingFrames(i));
        }
    }
    let size = pgram.width() - 1;
    Ok(seq
        .iter()
        .zip(emit_frames)
        .map(|(&p, &f)| {
            let row = &pgram.row(f)[..size];
            let mass: F = row.iter().copied().sum();
            if mass > F::zero() {
                row.iter().map(|&v| v / mass).collect()
            } else {
                let mut one_hot = vec![F::zero(); size];
                one_hot[p.index()] = F::one();
                one_hot
            }
        })
        .collect())
}

/// Best-path decoding: the argmax label of every frame, collapsed.
/// Ties go to the lower label index.
pub fn greedy_decode<F: Real>(pgram: &Posteriorgram<F>) -> PhonemeSeq {
    let blank = pgram.width() - 1;
    let mut out = Vec::new();
    let mut prev = blank;
    for row in pgram.rows() {
        let best = row
            .iter()
            .enumerate()
            .fold(0, |b, (i, &v)| if v > row[b] { i } else { b });
        if best != blank && best != prev {
            out.push(PhonemeId(best as u32));
        }
        prev = best;
    }
    PhonemeSeq::from_ids_unchecked(out)
}
