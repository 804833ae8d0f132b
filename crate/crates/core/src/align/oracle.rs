//! Brute-force alignment scoring by enumerating every global alignment.

use super::{AlignError, AlignParams};
use crate::phoneme::PhonemeId;
use crate::scalar::Score;

const MAX_TOTAL_LEN: usize = 12;

/// Best alignment score over all alignments of the two sequences.
pub fn oracle_align<S: Score>(canonical: &[PhonemeId], recognized: &[PhonemeId], params: &AlignParams<S>) -> Result<S, AlignError> {
    let total = canonical.len() + recognized.len();
    if total > MAX_TOTAL_LEN {
        return Err(AlignError::TooLarge(total));
    }
    Ok(best(canonical, recognized, params))
}

fn best<S: Score>(a: &[PhonemeId], b: &[PhonemeId], params: &AlignParams<S>) -> S {
    match (a.split_first(), b.split_first()) {
        (None, None) => S::zero(),
        (Some((_, rest)), None) => params.gap_score + best(rest, b, params),
        (None, Some((_, rest))) => params.gap_score + best(a, rest, params),
        (Some((&x, ra)), Some((&y, rb))) => {
            let candidates = [
                params.substitution(x, y) + best(ra, rb, params),
                params.gap_score + best(ra, b, params),
                params.gap_score + best(a, rb, params),
            ];
            candidates.into_iter().fold(candidates[0], |acc, v| if v > acc { v } else { acc })
        }
    }
}
