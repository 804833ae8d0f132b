//! Needleman-Wunsch global alignment of canonical against recognized phonemes.
//!
//! Generic over the score type: the default `i32` scoring is exact, float
//! scores are accepted for weighted variants. Traceback prefers
//! Match/Substitute, then Delete, then Insert at every tie.

pub mod oracle;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::phoneme::PhonemeId;
use crate::scalar::Score;

pub use oracle::oracle_align;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AlignError {
    #[error("invalid scores: match must exceed mismatch, gap and every similarity entry")]
    InvalidScores,
    #[error("instance too large to enumerate: {0} phonemes (limit 12)")]
    TooLarge(usize),
}

/// Pairwise substitution scores overriding the flat mismatch score.
pub type SimilarityTable<S> = HashMap<(PhonemeId, PhonemeId), S>;

#[derive(Debug, Clone, PartialEq)]
pub struct AlignParams<S: Score = i32> {
    pub match_score: S,
    pub mismatch_score: S,
    pub gap_score: S,
    /// Disabled by default: substitution scoring is phoneme identity only.
    pub similarity: Option<SimilarityTable<S>>,
}

impl Default for AlignParams<i32> {
    fn default() -> Self {
        Self::new(1, -1, -1).expect("default scores are valid")
    }
}

impl<S: Score> AlignParams<S> {
    pub fn new(match_score: S, mismatch_score: S, gap_score: S) -> Result<Self, AlignError> {
        let p = Self { match_score, mismatch_score, gap_score, similarity: None };
        p.validate()?;
        Ok(p)
    }

    pub fn with_similarity(mut self, table: SimilarityTable<S>) -> Result<Self, AlignError> {
        self.similarity = Some(table);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), AlignError> {
        let sims_ok = self
            .similarity
            .as_ref()
            .is_none_or(|t| t.values().all(|&v| v < self.match_score));
        if self.match_score > self.mismatch_score && self.match_score > self.gap_score && sims_ok {
            Ok(())
        } else {
            Err(AlignError::InvalidScores)
        }
    }

    pub fn substitution(&self, a: PhonemeId, b: PhonemeId) -> S {
        if a == b {
            return self.match_score;
        }
        self.similarity
            .as_ref()
            .and_then(|t| t.get(&(a, b)).or_else(|| t.get(&(b, a))))
            .copied()
            .unwrap_or(self.mismatch_score)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OpKind {
    Match,
    Substitute,
    /// Canonical phoneme with no recognized counterpart.
    Delete,
    /// Recognized phoneme with no canonical counterpart.
    Insert,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignOp {
    pub kind: OpKind,
    pub canonical: Option<usize>,
    pub recognized: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alignment<S = i32> {
    pub ops: Vec<AlignOp>,
    pub score: S,
}

impl<S> Alignment<S> {
    /// Projects the ops back onto the canonical sequence.
    pub fn replay_canonical(&self, canonical: &[PhonemeId]) -> Vec<PhonemeId> {
        self.ops.iter().filter_map(|op| op.canonical.map(|i| canonical[i])).collect()
    }

    pub fn replay_recognized(&self, recognized: &[PhonemeId]) -> Vec<PhonemeId> {
        self.ops.iter().filter_map(|op| op.recognized.map(|j| recognized[j])).collect()
    }

    pub fn count(&self, kind: OpKind) -> usize {
        self.ops.iter().filter(|op| op.kind == kind).count()
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Step {
    Diag,
    Up,
    Left,
}

/// Optimal global alignment with deterministic traceback.
pub fn align<S: Score>(canonical: &[PhonemeId], recognized: &[PhonemeId], params: &AlignParams<S>) -> Alignment<S> {
    let n = canonical.len();
    let m = recognized.len();
    let cols = m + 1;
    let mut score = vec![S::zero(); (n + 1) * cols];
    let mut step = vec![Step::Diag; (n + 1) * cols];
    for j in 1..=m {
        score[j] = score[j - 1] + params.gap_score;
        step[j] = Step::Left;
    }
    for i in 1..=n {
        score[i * cols] = score[(i - 1) * cols] + params.gap_score;
        step[i * cols] = Step::Up;
        for j in 1..=m {
            let diag = score[(i - 1) * cols + j - 1] + params.substitution(canonical[i - 1], recognized[j - 1]);
            let up = score[(i - 1) * cols + j] + params.gap_score;
            let left = score[i * cols + j - 1] + params.gap_score;
            let (mut best, mut how) = (diag, Step::Diag);
            if up > best {
                best = up;
                how = Step::Up;
            }
            if left > best {
                best = left;
                how = Step::Left;
            }
            score[i * cols + j] = best;
            step[i * cols + j] = how;
        }
    }

    let mut ops = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        match step[i * cols + j] {
            Step::Diag => {
                let kind = if canonical[i - 1] == recognized[j - 1] { OpKind::Match } else { OpKind::Substitute };
                ops.push(AlignOp { kind, canonical: Some(i - 1), recognized: Some(j - 1) });
                i -= 1;
                j -= 1;
            }
            Step::Up => {
                ops.push(AlignOp { kind: OpKind::Delete, canonical: Some(i - 1), recognized: None });
                i -= 1;
            }
            Step::Left => {
                ops.push(AlignOp { kind: OpKind::Insert, canonical: None, recognized: Some(j - 1) });
                j -= 1;
            }
        }
    }
    ops.reverse();
    Alignment { ops, score: score[n * cols + m] }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(v: &[u32]) -> Vec<PhonemeId> {
        v.iter().map(|&i| PhonemeId(i)).collect()
    }

    #[test]
    fn identity() {
        let a = ids(&[0, 1, 2]);
        let al = align(&a, &a, &AlignParams::default());
        assert_eq!(al.score, 3);
        assert_eq!(al.count(OpKind::Match), 3);
        assert_eq!(al.ops.len(), 3);
    }

    #[test]
    fn missing_initial_phoneme() {
        // ay s eh d  vs  s eh d
        let canonical = ids(&[0, 1, 2, 3]);
        let recognized = ids(&[1, 2, 3]);
        let al = align(&canonical, &recognized, &AlignParams::default());
        assert_eq!(al.ops[0], AlignOp { kind: OpKind::Delete, canonical: Some(0), recognized: None });
        assert!(al.ops[1..].iter().all(|op| op.kind == OpKind::Match));
        assert_eq!(al.score, 2);
    }

    #[test]
    fn empty_cases() {
        let p = AlignParams::default();
        let al = align(&[], &[], &p);
        assert!(al.ops.is_empty());
        assert_eq!(al.score, 0);
        let al = align(&[], &ids(&[4]), &p);
        assert_eq!(al.ops, vec![AlignOp { kind: OpKind::Insert, canonical: None, recognized: Some(0) }]);
        assert_eq!(al.score, -1);
    }

    #[test]
    fn tie_prefers_substitution() {
        let al = align(&ids(&[0]), &ids(&[1]), &AlignParams::default());
        assert_eq!(al.ops.len(), 1);
        assert_eq!(al.ops[0].kind, OpKind::Substitute);
    }

    #[test]
    fn tie_prefers_delete_over_insert() {
        // a b vs b a: both 2-gap and substitution routes exist.
        let p = AlignParams::new(2, -3, -1).unwrap();
        let al = align(&ids(&[0, 1]), &ids(&[1, 0]), &p);
        assert_eq!(al.score, 0);
        assert_eq!(al.replay_canonical(&ids(&[0, 1])), ids(&[0, 1]));
        assert_eq!(al.replay_recognized(&ids(&[1, 0])), ids(&[1, 0]));
        // Traceback runs backwards, so the trailing gap is taken first as a Delete.
        assert_eq!(al.ops.last().unwrap().kind, OpKind::Delete);
    }

    #[test]
    fn invalid_scores_rejected() {
        assert_eq!(AlignParams::new(0, 1, -1), Err(AlignError::InvalidScores));
        assert_eq!(AlignParams::new(1, -1, 2), Err(AlignError::InvalidScores));
        let mut t = SimilarityTable::new();
        t.insert((PhonemeId(0), PhonemeId(1)), 5);
        assert!(AlignParams::default().with_similarity(t).is_err());
    }

    #[test]
    fn similarity_hook_changes_substitution_cost() {
        let mut t = SimilarityTable::new();
        t.insert((PhonemeId(0), PhonemeId(1)), 0.5);
        let p = AlignParams::new(1.0, -1.0, -1.0).unwrap().with_similarity(t).unwrap();
        assert_eq!(p.substitution(PhonemeId(1), PhonemeId(0)), 0.5);
        assert_eq!(p.substitution(PhonemeId(2), PhonemeId(0)), -1.0);
        assert_eq!(align(&ids(&[0]), &ids(&[1]), &p).score, 0.5);
    }
}
