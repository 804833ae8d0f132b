//! Pronunciation model: a context-free probabilistic edit transducer giving
//! `p(r | r_c)`, the probability that a native speaker realizes canonical
//! phonemes `r_c` as `r`, plus the per-phoneme native likelihoods `π` that
//! the detector consumes.
//!
//! Generative story for one canonical sequence: each canonical phoneme `c`
//! is either emitted as some phoneme `a` (`sub[c][a]`) or deleted
//! (`sub[c][delete]`); after each canonical slot a geometric number of
//! phonemes is inserted, each continuing with probability `ins_rate` and
//! drawn from `ins_probs`.

mod train;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::align::{Alignment, OpKind};
use crate::decoder::Hypothesis;
use crate::io_util::write_atomic;
use crate::phoneme::{label_hash, PhonemeId, PhonemeInventory};
use crate::scalar::Real;

pub use train::{train, EditCounts};

#[derive(Debug, Error)]
pub enum PmError {
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("invalid transducer: {0}")]
    Invalid(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("transducer built for inventory {found}, expected {expected}")]
    HashMismatch { expected: String, found: String },
    #[error("transducer file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("transducer file: {0}")]
    Io(#[from] std::io::Error),
}

/// Trained edit transducer over a fixed inventory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct EditTransducer<F: Real = f64> {
    labels: Vec<String>,
    inventory_hash: String,
    /// `size × (size + 1)`: row `c` holds emission probabilities for every
    /// non-blank phoneme followed by the deletion probability.
    sub_probs: Vec<Vec<F>>,
    ins_probs: Vec<F>,
    ins_rate: F,
    smoothing_k: F,
}

fn tolerance<F: Real>(n: usize) -> f64 {
    (F::epsilon().as_f64() * 4.0 * n as f64).max(1e-9)
}

impl<F: Real> EditTransducer<F> {
    pub fn from_parts(
        inventory: &PhonemeInventory,
        sub_probs: Vec<Vec<F>>,
        ins_probs: Vec<F>,
        ins_rate: F,
        smoothing_k: F,
    ) -> Result<Self, PmError> {
        let t = Self {
            labels: inventory.labels().to_vec(),
            inventory_hash: inventory.hash(),
            sub_probs,
            ins_probs,
            ins_rate,
            smoothing_k,
        };
        t.validate()?;
        Ok(t)
    }

    /// Every canonical phoneme is always realized as itself; nothing is inserted.
    pub fn identity(inventory: &PhonemeInventory) -> Self {
        let n = inventory.size();
        let sub_probs = (0..n)
            .map(|c| {
                let mut row = vec![F::zero(); n + 1];
                row[c] = F::one();
                row
            })
            .collect();
        let ins_probs = vec![F::one() / F::from_usize(n).expect("size fits"); n];
        Self::from_parts(inventory, sub_probs, ins_probs, F::zero(), F::zero()).expect("identity is valid")
    }

    pub fn validate(&self) -> Result<(), PmError> {
        let n = self.labels.len().saturating_sub(1);
        if self.inventory_hash != label_hash(&self.labels) {
            return Err(PmError::Invalid("inventory hash does not match labels".into()));
        }
        if self.sub_probs.len() != n || self.sub_probs.iter().any(|r| r.len() != n + 1) || self.ins_probs.len() != n {
            return Err(PmError::Shape(format!("expected {n}×{} substitution table and {n} insertion entries", n + 1)));
        }
        let in_unit = |v: F| v >= F::zero() && v <= F::one();
        let tol = tolerance::<F>(n + 1);
        for (c, row) in self.sub_probs.iter().enumerate() {
            if !row.iter().all(|&v| in_unit(v)) {
                return Err(PmError::Invalid(format!("row {c} has entries outside [0,1]")));
            }
            let sum: f64 = row.iter().map(|v| v.as_f64()).sum();
            if (sum - 1.0).abs() > tol {
                return Err(PmError::Invalid(format!("row {c} sums to {sum}")));
            }
        }
        let ins_sum: f64 = self.ins_probs.iter().map(|v| v.as_f64()).sum();
        if !self.ins_probs.iter().all(|&v| in_unit(v)) || (ins_sum - 1.0).abs() > tol {
            return Err(PmError::Invalid(format!("insertion distribution sums to {ins_sum}")));
        }
        if !(self.ins_rate >= F::zero() && self.ins_rate < F::one()) {
            return Err(PmError::Invalid(format!("ins_rate {} outside [0,1)", self.ins_rate)));
        }
        if !(self.smoothing_k >= F::zero()) {
            return Err(PmError::Invalid("negative smoothing constant".into()));
        }
        Ok(())
    }

    /// Number of non-blank phonemes the transducer covers.
    pub fn size(&self) -> usize {
        self.ins_probs.len()
    }

    pub fn sub(&self, canonical: PhonemeId, emitted: PhonemeId) -> F {
        self.sub_probs[canonical.index()][emitted.index()]
    }

    pub fn delete(&self, canonical: PhonemeId) -> F {
        self.sub_probs[canonical.index()][self.size()]
    }

    pub fn sub_row(&self, canonical: PhonemeId) -> &[F] {
        &self.sub_probs[canonical.index()][..self.size()]
    }

    pub fn ins(&self, phoneme: PhonemeId) -> F {
        self.ins_probs[phoneme.index()]
    }

    pub fn ins_probs(&self) -> &[F] {
        &self.ins_probs
    }

    pub fn ins_rate(&self) -> F {
        self.ins_rate
    }

    pub fn smoothing_k(&self) -> F {
        self.smoothing_k
    }

    pub fn inventory_hash(&self) -> &str {
        &self.inventory_hash
    }

    pub fn check_inventory(&self, inventory: &PhonemeInventory) -> Result<(), PmError> {
        let expected = inventory.hash();
        if expected != self.inventory_hash {
            return Err(PmError::HashMismatch { expected, found: self.inventory_hash.clone() });
        }
        Ok(())
    }

    /// `p(recognized | canonical)`: forward sum over every edit path.
    pub fn sequence_likelihood(&self, recognized: &[PhonemeId], canonical: &[PhonemeId]) -> F {
        let m = recognized.len();
        let stop = F::one() - self.ins_rate;
        // alpha[j]: probability of having produced recognized[..j] after the
        // current canonical prefix, insertion phase included.
        let mut alpha = vec![F::zero(); m + 1];
        alpha[0] = F::one();
        let mut emitted = vec![F::zero(); m + 1];
        for &c in canonical {
            let del = self.delete(c);
            for j in 0..=m {
                let mut v = alpha[j] * del;
                if j > 0 {
                    v += alpha[j - 1] * self.sub(c, recognized[j - 1]);
                }
                emitted[j] = v;
            }
            let mut run = F::zero();
            for j in 0..=m {
                run = if j == 0 {
                    emitted[0]
                } else {
                    emitted[j] + run * self.ins_rate * self.ins(recognized[j - 1])
                };
                alpha[j] = stop * run;
            }
        }
        alpha[m].min(F::one())
    }

    /// Per recognized phoneme native likelihood `π`, marginalized over the
    /// phoneme's posterior distribution, plus deletion likelihoods for
    /// canonical phonemes with no recognized counterpart.
    pub fn phoneme_likelihoods(
        &self,
        hyp: &Hypothesis<F>,
        alignment: &Alignment<impl Copy>,
        canonical: &[PhonemeId],
    ) -> Result<LikelihoodSeq<F>, PmError> {
        check_alignment(alignment, canonical.len(), hyp.seq.len())?;
        if hyp.pos_posteriors.len() != hyp.seq.len() {
            return Err(PmError::Shape(format!(
                "{} posterior rows for {} phonemes",
                hyp.pos_posteriors.len(),
                hyp.seq.len()
            )));
        }
        if let Some(row) = hyp.pos_posteriors.iter().find(|r| r.len() != self.size()) {
            return Err(PmError::Shape(format!("posterior width {} vs inventory {}", row.len(), self.size())));
        }
        let mut pi = vec![F::zero(); hyp.seq.len()];
        let mut deletions = Vec::new();
        for op in &alignment.ops {
            match (op.kind, op.canonical, op.recognized) {
                (OpKind::Match | OpKind::Substitute, Some(i), Some(j)) => {
                    let c = canonical[i];
                    let keep = F::one() - self.delete(c);
                    let mass: F = dot(&hyp.pos_posteriors[j], self.sub_row(c));
                    pi[j] = if keep > F::zero() { clamp_unit(mass / keep) } else { F::zero() };
                }
                (OpKind::Insert, None, Some(j)) => {
                    pi[j] = clamp_unit(dot(&hyp.pos_posteriors[j], &self.ins_probs) * self.ins_rate);
                }
                (OpKind::Delete, Some(i), None) => deletions.push((i, self.delete(canonical[i]))),
                _ => return Err(PmError::Shape("malformed alignment op".into())),
            }
        }
        Ok(LikelihoodSeq { pi, deletions })
    }

    /// Hypothesis-weighted sequence-level likelihood `Σ_h p(h | o) p(r = h | r_c)`.
    pub fn marginal_sequence_likelihood(&self, hyps: &[Hypothesis<F>], canonical: &[PhonemeId]) -> F {
        hyps.iter().map(|h| h.weight() * self.sequence_likelihood(&h.seq, canonical)).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("transducer serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, PmError> {
        let t: Self = serde_json::from_str(text)?;
        t.validate()?;
        Ok(t)
    }

    pub fn save(&self, path: &Path) -> Result<(), PmError> {
        write_atomic(path, self.to_json().as_bytes())?;
        Ok(())
    }

    /// Loads and validates a transducer, checking it matches `inventory`.
    pub fn load(path: &Path, inventory: &PhonemeInventory) -> Result<Self, PmError> {
        let t = Self::from_json(&std::fs::read_to_string(path)?)?;
        t.check_inventory(inventory)?;
        Ok(t)
    }
}

fn dot<F: Real>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn clamp_unit<F: Real>(v: F) -> F {
    v.max(F::zero()).min(F::one())
}

pub(crate) fn check_alignment<S>(alignment: &Alignment<S>, canonical: usize, recognized: usize) -> Result<(), PmError> {
    let c = alignment.ops.iter().filter(|op| op.canonical.is_some()).count();
    let r = alignment.ops.iter().filter(|op| op.recognized.is_some()).count();
    if c != canonical || r != recognized {
        return Err(PmError::Shape(format!(
            "alignment covers {c}/{r} phonemes, sequences have {canonical}/{recognized}"
        )));
    }
    Ok(())
}

/// Native-pronunciation likelihoods for one hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodSeq<F: Real = f64> {
    /// Indexed like the recognized sequence.
    pub pi: Vec<F>,
    /// `(canonical position, deletion probability)` for every Delete op.
    pub deletions: Vec<(usize, F)>,
}

impl<F: Real> LikelihoodSeq<F> {
    pub fn deletion(&self, canonical_pos: usize) -> Option<F> {
        self.deletions.iter().find(|(i, _)| *i == canonical_pos).map(|&(_, p)| p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::align::{align, AlignParams};
    use crate::phoneme::PhonemeSeq;

    pub(crate) fn inv3() -> PhonemeInventory {
        // non-blank: a b pause eos
        PhonemeInventory::new(&["a", "b", "pause", "eos", "blank"]).unwrap()
    }

    fn ids(v: &[u32]) -> Vec<PhonemeId> {
        v.iter().map(|&i| PhonemeId(i)).collect()
    }

    #[test]
    fn identity_likelihoods() {
        let t = EditTransducer::<f64>::identity(&inv3());
        assert_eq!(t.sequence_likelihood(&ids(&[0, 1]), &ids(&[0, 1])), 1.0);
        assert_eq!(t.sequence_likelihood(&ids(&[1, 1]), &ids(&[0, 1])), 0.0);
        assert_eq!(t.sequence_likelihood(&ids(&[0]), &ids(&[0, 1])), 0.0);
        assert_eq!(t.sequence_likelihood(&[], &[]), 1.0);
    }

    #[test]
    fn one_hot_match_gives_one() {
        let inv = inv3();
        let t = EditTransducer::<f64>::identity(&inv);
        let seq = PhonemeSeq::new(ids(&[0]), &inv).unwrap();
        let hyp = Hypothesis::certain(seq.clone(), inv.size());
        let al = align(&seq, &seq, &AlignParams::default());
        let lik = t.phoneme_likelihoods(&hyp, &al, &seq).unwrap();
        assert_eq!(lik.pi, vec![1.0]);
    }

    #[test]
    fn schwa_marginalization() {
        // columns: ih ax pause eos ; delete
        let inv = PhonemeInventory::new(&["ih", "ax", "pause", "eos", "blank"]).unwrap();
        let sub = vec![
            vec![0.6, 0.4, 0.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0, 0.0],
        ];
        let t = EditTransducer::<f64>::from_parts(&inv, sub, vec![0.25; 4], 0.0, 0.0).unwrap();
        let canonical = ids(&[0]);
        let mut hyp = Hypothesis::certain(PhonemeSeq::new(ids(&[1]), &inv).unwrap(), 4);
        hyp.pos_posteriors = vec![vec![0.5, 0.5, 0.0, 0.0]];
        let al = align(&canonical, &hyp.seq, &AlignParams::default());
        let lik = t.phoneme_likelihoods(&hyp, &al, &canonical).unwrap();
        let expected = 0.5 * 0.6 + 0.5 * 0.4;
        assert!((lik.pi[0] - expected).abs() < 1e-15);
        assert!((lik.pi[0] - 0.50).abs() < 1e-15);
    }

    #[test]
    fn deletion_mass_is_renormalized_out() {
        let inv = inv3();
        let sub = vec![
            vec![0.3, 0.2, 0.0, 0.0, 0.5],
            vec![0.0, 1.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0, 0.0],
        ];
        let t = EditTransducer::<f64>::from_parts(&inv, sub, vec![0.25; 4], 0.5, 0.0).unwrap();
        let canonical = ids(&[0, 1]);
        let hyp = Hypothesis::certain(PhonemeSeq::new(ids(&[0, 0, 1]), &inv).unwrap(), 4);
        let al = align(&canonical, &hyp.seq, &AlignParams::default());
        let lik = t.phoneme_likelihoods(&hyp, &al, &canonical).unwrap();
        // Traceback attributes the leading `a` to the insertion.
        assert!((lik.pi[0] - 0.125).abs() < 1e-15);
        assert!((lik.pi[1] - 0.6).abs() < 1e-15);
        assert_eq!(lik.pi[2], 1.0);

        let short = Hypothesis::certain(PhonemeSeq::new(ids(&[1]), &inv).unwrap(), 4);
        let al = align(&canonical, &short.seq, &AlignParams::default());
        let lik = t.phoneme_likelihoods(&short, &al, &canonical).unwrap();
        assert_eq!(lik.deletion(0), Some(0.5));
    }

    #[test]
    fn rejects_misaligned_input() {
        let inv = inv3();
        let t = EditTransducer::<f64>::identity(&inv);
        let seq = PhonemeSeq::new(ids(&[0, 1]), &inv).unwrap();
        let hyp = Hypothesis::certain(seq.clone(), inv.size());
        let al = align(&ids(&[0]), &seq, &AlignParams::default());
        assert!(matches!(t.phoneme_likelihoods(&hyp, &al, &seq), Err(PmError::Shape(_))));
    }

    #[test]
    fn invalid_tables_rejected() {
        let inv = inv3();
        let bad = vec![vec![0.5, 0.0, 0.0, 0.0, 0.0]; 4];
        assert!(EditTransducer::<f64>::from_parts(&inv, bad, vec![0.25; 4], 0.0, 0.0).is_err());
        let t = EditTransducer::<f64>::identity(&inv);
        assert!(EditTransducer::<f64>::from_parts(&inv, t.sub_probs.clone(), vec![0.25; 4], 1.0, 0.0).is_err());
    }

    #[test]
    fn save_load_round_trip_and_hash_check() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pm.json");
        let inv = inv3();
        let t = EditTransducer::<f64>::identity(&inv);
        t.save(&path).unwrap();
        assert_eq!(EditTransducer::<f64>::load(&path, &inv).unwrap(), t);
        let other = PhonemeInventory::new(&["x", "y", "pause", "eos", "blank"]).unwrap();
        assert!(matches!(EditTransducer::<f64>::load(&path, &other), Err(PmError::HashMismatch { .. })));
    }
}
