//! Word-level precision/recall scoring, Wilson score intervals and
//! threshold sweeps.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::corpus::ErrorAnnotation;
use crate::detector::{is_flagged, ThresholdRule, UtteranceDecisions};
use crate::scalar::Real;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("no decisions for annotated utterance `{0}`")]
    MissingUtterance(String),
    #[error("utterance `{id}`: {decided} decided words vs {labeled} labels")]
    WordCount { id: String, decided: usize, labeled: usize },
    #[error("confidence interval needs at least one trial")]
    NoTrials,
    #[error("{successes} successes out of {trials} trials")]
    BadCounts { successes: u64, trials: u64 },
    #[error("confidence level {0} outside (0, 1)")]
    BadConfidence(f64),
    #[error("threshold grid: {0}")]
    BadGrid(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn add(&mut self, flagged: bool, labeled: bool) {
        match (flagged, labeled) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn merge(self, other: ConfusionCounts) -> ConfusionCounts {
        ConfusionCounts {
            tp: self.tp + other.tp,
            fp: self.fp + other.fp,
            fn_: self.fn_ + other.fn_,
            tn: self.tn + other.tn,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

/// `(precision, recall)`; either is `None` when its denominator is zero.
pub fn precision_recall<F: Real>(counts: &ConfusionCounts) -> (Option<F>, Option<F>) {
    let ratio = |num: u64, den: u64| (den > 0).then(|| F::from_u64(num).unwrap() / F::from_u64(den).unwrap());
    (ratio(counts.tp, counts.tp + counts.fp), ratio(counts.tp, counts.tp + counts.fn_))
}

/// Two-sided normal quantile for a confidence level (0.95 → 1.959964).
pub fn z_score(confidence: f64) -> Result<f64, EvalError> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(EvalError::BadConfidence(confidence));
    }
    let normal = Normal::standard();
    Ok(normal.inverse_cdf(1.0 - (1.0 - confidence) / 2.0))
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_ci<F: Real>(successes: u64, trials: u64, confidence: f64) -> Result<(F, F), EvalError> {
    if trials == 0 {
        return Err(EvalError::NoTrials);
    }
    if successes > trials {
        return Err(EvalError::BadCounts { successes, trials });
    }
    let z = F::from_f64_lossy(z_score(confidence)?);
    let n = F::from_u64(trials).unwrap();
    let p = F::from_u64(successes).unwrap() / n;
    let two = F::from_f64_lossy(2.0);
    let four = F::from_f64_lossy(4.0);
    let z2 = z * z;
    let denom = F::one() + z2 / n;
    let center = (p + z2 / (two * n)) / denom;
    let half = z * (p * (F::one() - p) / n + z2 / (four * n * n)).sqrt() / denom;
    let lo = if successes == 0 { F::zero() } else { (center - half).max(F::zero()) };
    let hi = if successes == trials { F::one() } else { (center + half).min(F::one()) };
    Ok((lo, hi))
}

fn index_decisions<F: Real>(decisions: &[UtteranceDecisions<F>]) -> HashMap<&str, &UtteranceDecisions<F>> {
    decisions.iter().map(|d| (d.id.as_str(), d)).collect()
}

/// Confusion counts of the stored `flagged` verdicts against annotations.
/// Decisions for unannotated utterances are ignored.
pub fn score<F: Real>(decisions: &[UtteranceDecisions<F>], annotations: &[ErrorAnnotation]) -> Result<ConfusionCounts, EvalError> {
    let by_id = index_decisions(decisions);
    let mut counts = ConfusionCounts::default();
    for ann in annotations {
        let d = by_id.get(ann.id.as_str()).ok_or_else(|| EvalError::MissingUtterance(ann.id.clone()))?;
        if d.words.len() != ann.labels.len() {
            return Err(EvalError::WordCount { id: ann.id.clone(), decided: d.words.len(), labeled: ann.labels.len() });
        }
        for (w, &label) in d.words.iter().zip(&ann.labels) {
            counts.add(w.flagged, label == 1);
        }
    }
    Ok(counts)
}

/// One annotated word with the error probabilities the detector assigned it.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredWord<F: Real = f64> {
    pub per_hypothesis_probs: Vec<F>,
    pub labeled: bool,
}

/// Pairs every annotated word with its per-hypothesis error probabilities.
pub fn join_scores<F: Real>(
    decisions: &[UtteranceDecisions<F>],
    annotations: &[ErrorAnnotation],
) -> Result<Vec<ScoredWord<F>>, EvalError> {
    let by_id = index_decisions(decisions);
    let mut out = Vec::new();
    for ann in annotations {
        let d = by_id.get(ann.id.as_str()).ok_or_else(|| EvalError::MissingUtterance(ann.id.clone()))?;
        if d.words.len() != ann.labels.len() {
            return Err(EvalError::WordCount { id: ann.id.clone(), decided: d.words.len(), labeled: ann.labels.len() });
        }
        out.extend(d.words.iter().zip(&ann.labels).map(|(w, &l)| ScoredWord {
            per_hypothesis_probs: w.per_hypothesis_probs.clone(),
            labeled: l == 1,
        }));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PRPoint<F: Real = f64> {
    pub threshold: F,
    pub precision: Option<F>,
    pub recall: Option<F>,
    pub precision_ci: Option<(F, F)>,
    pub recall_ci: Option<(F, F)>,
    pub counts: ConfusionCounts,
}

impl<F: Real> PRPoint<F> {
    pub fn from_counts(threshold: F, counts: ConfusionCounts, confidence: f64) -> Result<Self, EvalError> {
        let (precision, recall) = precision_recall(&counts);
        let flagged = counts.tp + counts.fp;
        let labeled = counts.tp + counts.fn_;
        Ok(Self {
            threshold,
            precision,
            recall,
            precision_ci: if flagged > 0 { Some(wilson_ci(counts.tp, flagged, confidence)?) } else { None },
            recall_ci: if labeled > 0 { Some(wilson_ci(counts.tp, labeled, confidence)?) } else { None },
            counts,
        })
    }
}

/// Confusion counts at a single threshold, recomputed from probabilities.
pub fn counts_at<F: Real>(words: &[ScoredWord<F>], threshold: F, rule: ThresholdRule) -> ConfusionCounts {
    let mut counts = ConfusionCounts::default();
    for w in words {
        counts.add(is_flagged(&w.per_hypothesis_probs, threshold, rule), w.labeled);
    }
    counts
}

pub fn validate_grid<F: Real>(grid: &[F]) -> Result<(), EvalError> {
    if grid.is_empty() {
        return Err(EvalError::BadGrid("empty".into()));
    }
    if grid.iter().any(|&t| !(t >= F::zero() && t <= F::one())) {
        return Err(EvalError::BadGrid("thresholds must lie in [0, 1]".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(EvalError::BadGrid("thresholds must be strictly increasing".into()));
    }
    Ok(())
}

/// One precision/recall point (with 95% Wilson intervals) per threshold.
pub fn sweep<F: Real>(words: &[ScoredWord<F>], grid: &[F], rule: ThresholdRule) -> Result<Vec<PRPoint<F>>, EvalError> {
    validate_grid(grid)?;
    grid.iter()
        .map(|&t| PRPoint::from_counts(t, counts_at(words, t, rule), 0.95))
        .collect()
}

/// Parses `lo:hi:step` into an inclusive, strictly increasing grid.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, EvalError> {
    let parts: Vec<f64> = spec
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| EvalError::BadGrid(format!("cannot parse `{spec}`"))))
        .collect::<Result<_, _>>()?;
    let [lo, hi, step] = parts[..] else {
        return Err(EvalError::BadGrid(format!("expected lo:hi:step, got `{spec}`")));
    };
    if !(step > 0.0) || hi < lo {
        return Err(EvalError::BadGrid(format!("bad range `{spec}`")));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    // 12 decimals: `0:1:0.01` gives 0.07, not 0.07000000000000001.
    let grid: Vec<f64> = (0..count).map(|i| ((lo + i as f64 * step) * 1e12).round() / 1e12).collect();
    validate_grid(&grid)?;
    Ok(grid)
}

pub fn curve_to_csv<F: Real>(points: &[PRPoint<F>]) -> String {
    let opt = |v: Option<F>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut out = String::from("threshold,precision,p_lo,p_hi,recall,r_lo,r_hi\n");
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            p.threshold,
            opt(p.precision),
            opt(p.precision_ci.map(|c| c.0)),
            opt(p.precision_ci.map(|c| c.1)),
            opt(p.recall),
            opt(p.recall_ci.map(|c| c.0)),
            opt(p.recall_ci.map(|c| c.1)),
        );
    }
    out
}

/// The defined-precision point whose recall lies within `tolerance` of
/// `target` and is closest to it; ties go to the higher precision.
pub fn point_near_recall<F: Real>(curve: &[PRPoint<F>], target: F, tolerance: F) -> Option<&PRPoint<F>> {
    curve
        .iter()
        .filter(|p| p.precision.is_some())
        .filter_map(|p| p.recall.map(|r| ((r - target).abs(), p)))
        .filter(|(d, _)| *d <= tolerance)
        .min_by(|(da, a), (db, b)| {
            da.partial_cmp(db)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| b.precision.partial_cmp(&a.precision).unwrap_or(std::cmp::Ordering::Equal))
        })
        .map(|(_, p)| p)
}

/// Index pairs of points from two curves whose recalls differ by at most `tolerance`.
pub fn matched_recall_pairs<F: Real>(a: &[PRPoint<F>], b: &[PRPoint<F>], tolerance: F) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for (i, pa) in a.iter().enumerate() {
        for (j, pb) in b.iter().enumerate() {
            if let (Some(ra), Some(rb), Some(_), Some(_)) = (pa.recall, pb.recall, pa.precision, pb.precision) {
                if (ra - rb).abs() <= tolerance {
                    pairs.push((i, j));
                }
            }
        }
    }
    pairs
}

/// Summary of one system at one operating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mode: String,
    pub threshold: f64,
    pub precision: Option<f64>,
    pub precision_ci: Option<(f64, f64)>,
    pub recall: Option<f64>,
    pub recall_ci: Option<(f64, f64)>,
    pub counts: ConfusionCounts,
}

impl Summary {
    pub fn new(mode: impl Into<String>, threshold: f64, counts: ConfusionCounts) -> Result<Self, EvalError> {
        let p = PRPoint::<f64>::from_counts(threshold, counts, 0.95)?;
        Ok(Self {
            mode: mode.into(),
            threshold,
            precision: p.precision,
            precision_ci: p.precision_ci,
            recall: p.recall,
            recall_ci: p.recall_ci,
            counts,
        })
    }
}
