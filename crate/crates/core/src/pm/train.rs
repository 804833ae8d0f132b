use rayon::prelude::*;

use super::{EditTransducer, PmError};
use crate::align::{align, AlignParams, OpKind};
use crate::phoneme::{PhonemeId, PhonemeInventory, PhonemeSeq};
use crate::scalar::{Real, Score};

/// Edit-event counts from aligned (canonical, realized) pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EditCounts {
    /// `size × (size + 1)`, last column counts deletions.
    pub sub: Vec<Vec<u64>>,
    pub ins: Vec<u64>,
    /// Canonical phonemes seen, i.e. insertion slots.
    pub slots: u64,
}

impl EditCounts {
    pub fn zeros(size: usize) -> Self {
        Self { sub: vec![vec![0; size + 1]; size], ins: vec![0; size], slots: 0 }
    }

    pub fn observe<S: Score>(&mut self, canonical: &[PhonemeId], realized: &[PhonemeId], params: &AlignParams<S>) {
        let size = self.ins.len();
        let alignment = align(canonical, realized, params);
        for op in &alignment.ops {
            match (op.kind, op.canonical, op.recognized) {
                (OpKind::Match | OpKind::Substitute, Some(i), Some(j)) => {
                    self.sub[canonical[i].index()][realized[j].index()] += 1;
                }
                (OpKind::Delete, Some(i), None) => self.sub[canonical[i].index()][size] += 1,
                (OpKind::Insert, None, Some(j)) => self.ins[realized[j].index()] += 1,
                _ => unreachable!("aligner emits well-formed ops"),
            }
        }
        self.slots += canonical.len() as u64;
    }

    pub fn merge(mut self, other: &EditCounts) -> Self {
        for (row, o) in self.sub.iter_mut().zip(&other.sub) {
            for (a, b) in row.iter_mut().zip(o) {
                *a += b;
            }
        }
        for (a, b) in self.ins.iter_mut().zip(&other.ins) {
            *a += b;
        }
        self.slots += other.slots;
        self
    }

    pub fn insertions(&self) -> u64 {
        self.ins.iter().sum()
    }

    /// Add-k smoothing and normalization into a transducer.
    pub fn normalize<F: Real>(&self, inventory: &PhonemeInventory, smoothing_k: F) -> Result<EditTransducer<F>, PmError> {
        let size = inventory.size();
        let f = |n: u64| F::from_u64(n).expect("count fits");
        let sub_probs = self
            .sub
            .iter()
            .enumerate()
            .map(|(c, row)| {
                let total = f(row.iter().sum::<u64>()) + smoothing_k * f(row.len() as u64);
                if total > F::zero() {
                    row.iter().map(|&n| (f(n) + smoothing_k) / total).collect()
                } else {
                    let mut identity = vec![F::zero(); size + 1];
                    identity[c] = F::one();
                    identity
                }
            })
            .collect();
        let ins_total = f(self.insertions()) + smoothing_k * f(size as u64);
        let ins_probs = if ins_total > F::zero() {
            self.ins.iter().map(|&n| (f(n) + smoothing_k) / ins_total).collect()
        } else {
            vec![F::one() / f(size as u64); size]
        };
        // Geometric MLE: insertions per (insertions + slot terminations).
        let inserted = self.insertions();
        let ins_rate = if self.slots == 0 { F::zero() } else { f(inserted) / f(inserted + self.slots) };
        EditTransducer::from_parts(inventory, sub_probs, ins_probs, ins_rate, smoothing_k)
    }
}

/// Aligns every (canonical, realized) pair, counts edit events (in parallel,
/// merged exactly), applies add-k smoothing and normalizes.
pub fn train<F: Real, S: Score>(
    inventory: &PhonemeInventory,
    pairs: &[(PhonemeSeq, PhonemeSeq)],
    smoothing_k: F,
    params: &AlignParams<S>,
) -> Result<EditTransducer<F>, PmError> {
    if pairs.is_empty() {
        return Err(PmError::EmptyTrainingSet);
    }
    if smoothing_k < F::zero() {
        return Err(PmError::Invalid("negative smoothing constant".into()));
    }
    let size = inventory.size();
    let blank = inventory.blank();
    if pairs.iter().flat_map(|(c, r)| c.iter().chain(r.iter())).any(|&p| p.index() >= size || p == blank) {
        return Err(PmError::Shape("training pair contains blank or out-of-inventory phoneme".into()));
    }
    let counts = pairs
        .par_iter()
        .fold(
            || EditCounts::zeros(size),
            |mut acc, (canonical, realized)| {
                acc.observe(canonical, realized, params);
                acc
            },
        )
        .reduce(|| EditCounts::zeros(size), |a, b| a.merge(&b));
    counts.normalize(inventory, smoothing_k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inv() -> PhonemeInventory {
        PhonemeInventory::new(&["ih", "ax", "n", "ah", "f", "eh", "ey", "pause", "eos", "blank"]).unwrap()
    }

    fn seq(inv: &PhonemeInventory, s: &str) -> PhonemeSeq {
        inv.parse_seq(s).unwrap()
    }

    #[test]
    fn empty_set_rejected() {
        assert!(matches!(
            train::<f64, i32>(&inv(), &[], 0.1, &AlignParams::default()),
            Err(PmError::EmptyTrainingSet)
        ));
    }

    #[test]
    fn identity_data() {
        let inv = inv();
        let s = seq(&inv, "ih n ah f");
        let t = train::<f64, i32>(&inv, &[(s.clone(), s.clone()), (s.clone(), s.clone())], 0.0, &AlignParams::default())
            .unwrap();
        for p in s.iter() {
            assert_eq!(t.sub(*p, *p), 1.0);
        }
        assert_eq!(t.ins_rate(), 0.0);
        assert_eq!(t.sequence_likelihood(&s, &s), 1.0);
    }

    #[test]
    fn eh_to_ey_rate() {
        let inv = inv();
        let canonical = seq(&inv, "eh");
        let mut pairs = Vec::new();
        for i in 0..100 {
            let realized = if i % 10 < 3 { seq(&inv, "ey") } else { seq(&inv, "eh") };
            pairs.push((canonical.clone(), realized));
        }
        let t = train::<f64, i32>(&inv, &pairs, 0.0, &AlignParams::default()).unwrap();
        let (eh, ey) = (inv.id("eh").unwrap(), inv.id("ey").unwrap());
        assert!((t.sub(eh, ey) - 0.30).abs() < 1e-12);
        assert!((t.sub(eh, eh) - 0.70).abs() < 1e-12);
    }

    #[test]
    fn enough_variants_both_positive() {
        let inv = inv();
        let canonical = seq(&inv, "ih n ah f");
        let pairs = vec![
            (canonical.clone(), seq(&inv, "ih n ah f")),
            (canonical.clone(), seq(&inv, "ax n ah f")),
        ];
        let t = train::<f64, i32>(&inv, &pairs, 0.0, &AlignParams::default()).unwrap();
        let (ih, ax) = (inv.id("ih").unwrap(), inv.id("ax").unwrap());
        assert!(t.sub(ih, ih) > 0.0);
        assert!(t.sub(ih, ax) > 0.0);
    }

    #[test]
    fn smoothing_fills_unseen() {
        let inv = inv();
        let s = seq(&inv, "eh");
        let t = train::<f64, i32>(&inv, &[(s.clone(), s)], 0.1, &AlignParams::default()).unwrap();
        let (eh, ey, ih) = (inv.id("eh").unwrap(), inv.id("ey").unwrap(), inv.id("ih").unwrap());
        assert!(t.sub(eh, ey) > 0.0);
        assert!((t.sub(eh, eh) - 1.1 / 2.0).abs() < 1e-15);
        // never-seen canonical rows become uniform
        assert!((t.sub(ih, ih) - t.sub(ih, ey)).abs() < 1e-15);
    }

    #[test]
    fn insertion_rate_is_geometric_mle() {
        let inv = inv();
        let pairs = vec![(seq(&inv, "ih n"), seq(&inv, "ih ax n")), (seq(&inv, "ih n"), seq(&inv, "ih n"))];
        let t = train::<f64, i32>(&inv, &pairs, 0.0, &AlignParams::default()).unwrap();
        // 1 insertion over 4 slots
        assert!((t.ins_rate() - 0.2).abs() < 1e-15);
        assert_eq!(t.ins(inv.id("ax").unwrap()), 1.0);
    }

    #[test]
    fn parallel_counting_is_order_independent() {
        let inv = inv();
        let mut pairs: Vec<(PhonemeSeq, PhonemeSeq)> = (0..50)
            .map(|i| {
                let r = if i % 3 == 0 { "ax n ah" } else if i % 3 == 1 { "ih n ah f f" } else { "eh n" };
                (seq(&inv, "ih n ah f"), seq(&inv, r))
            })
            .collect();
        let a = train::<f64, i32>(&inv, &pairs, 0.1, &AlignParams::default()).unwrap();
        pairs.reverse();
        let b = train::<f64, i32>(&inv, &pairs, 0.1, &AlignParams::default()).unwrap();
        assert_eq!(a, b);
    }
}
