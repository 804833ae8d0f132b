//! Exhaustive CTC path enumeration, the reference for [`super::beam_decode`].

use std::collections::HashMap;

use super::{extract_pos_posteriors, DecodeError, Hypothesis};
use crate::pgram::Posteriorgram;
use crate::phoneme::{PhonemeId, PhonemeSeq};
use crate::scalar::{Real, PROB_FLOOR};

const MAX_PATHS: f64 = 1e7;

struct Collapsed<F> {
    mass: F,
    best_path_mass: F,
    best_frames: Vec<usize>,
}

/// Exact top-`n_best` collapsed sequences by summed path probability.
///
/// Weights are normalized over every enumerated sequence. Emission frames are
/// taken from each sequence's single most probable path.
pub fn oracle_decode<F: Real>(pgram: &Posteriorgram<F>, n_best: usize) -> Result<Vec<Hypothesis<F>>, DecodeError> {
    let width = pgram.width();
    let frames = pgram.num_frames();
    let paths = (width as f64).powi(frames as i32);
    if paths > MAX_PATHS {
        return Err(DecodeError::TooLarge(paths));
    }
    let blank = width - 1;
    let probs: Vec<Vec<F>> = (0..frames)
        .map(|t| {
            let sum = pgram.row_sum(t);
            pgram
                .row(t)
                .iter()
                .map(|&v| {
                    let p = v / sum;
                    if p.as_f64() < PROB_FLOOR { F::zero() } else { p }
                })
                .collect()
        })
        .collect();

    let mut table: HashMap<Vec<PhonemeId>, Collapsed<F>> = HashMap::new();
    let mut path = vec![0usize; frames];
    loop {
        let mass = path.iter().enumerate().fold(F::one(), |acc, (t, &c)| acc * probs[t][c]);
        if mass > F::zero() || frames == 0 {
            let (seq, emit) = collapse(&path, blank, &probs);
            let entry = table.entry(seq).or_insert(Collapsed {
                mass: F::zero(),
                best_path_mass: F::neg_infinity(),
                best_frames: Vec::new(),
            });
            entry.mass += mass;
            if mass > entry.best_path_mass {
                entry.best_path_mass = mass;
                entry.best_frames = emit;
            }
        }
        // odometer increment
        let mut t = 0;
        while t < frames {
            path[t] += 1;
            if path[t] < width {
                break;
            }
            path[t] = 0;
            t += 1;
        }
        if t == frames {
            break;
        }
    }

    let total: F = table.values().map(|c| c.mass).sum();
    let mut ranked: Vec<(Vec<PhonemeId>, Collapsed<F>)> = table.into_iter().collect();
    ranked.sort_by(|a, b| {
        b.1.mass
            .partial_cmp(&a.1.mass)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.0.cmp(&b.0))
    });
    ranked.truncate(n_best);
    ranked
        .into_iter()
        .map(|(ids, c)| {
            let seq = PhonemeSeq::from_ids_unchecked(ids);
            let pos_posteriors = extract_pos_posteriors(pgram, &seq, &c.best_frames)?;
            Ok(Hypothesis {
                seq,
                log_weight: (c.mass / total).ln(),
                log_path_sum: c.mass.ln(),
                emit_frames: c.best_frames,
                pos_posteriors,
            })
        })
        .collect()
}

/// CTC collapse of one frame path, with the peak frame of each output run.
fn collapse<F: Real>(path: &[usize], blank: usize, probs: &[Vec<F>]) -> (Vec<PhonemeId>, Vec<usize>) {
    let mut seq = Vec::new();
    let mut emit: Vec<usize> = Vec::new();
    let mut prev = blank;
    for (t, &c) in path.iter().enumerate() {
        if c != blank {
            if c != prev {
                seq.push(PhonemeId::from(c));
                emit.push(t);
            } else {
                let last = emit.last_mut().expect("run in progress");
                if probs[t][c] > probs[*last][c] {
                    *last = t;
                }
            }
        }
        prev = c;
    }
    (seq, emit)
}
