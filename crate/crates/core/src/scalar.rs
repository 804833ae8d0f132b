//! Scalar abstraction shared by the probabilistic modules.
//!
//! Decoding, pronunciation modelling and evaluation are written against
//! [`Real`] so the same code runs in `f32` (compact posteriorgram storage)
//! and `f64` (oracle-grade accuracy). Alignment scores use the looser
//! [`Score`] bound so integer scoring stays exact.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Probabilities below this value are treated as impossible events.
pub const PROB_FLOOR: f64 = 1e-12;

/// Floating point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + FromStr
    + 'static
{
    /// Significant decimal digits that round-trip this type exactly.
    const ROUND_TRIP_DIGITS: usize;

    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 converts to every Real")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("Real converts to f64")
    }
}

impl Real for f32 {
    const ROUND_TRIP_DIGITS: usize = 9;
}

impl Real for f64 {
    const ROUND_TRIP_DIGITS: usize = 17;
}

/// Additive alignment score: integers for exact scoring, floats for weighted.
pub trait Score:
    Copy + PartialOrd + num_traits::Num + Debug + Display + Send + Sync + 'static
{
}

impl<T> Score for T where
    T: Copy + PartialOrd + num_traits::Num + Debug + Display + Send + Sync + 'static
{
}

/// `ln(exp(a) + exp(b))` without overflow.
pub fn log_add<F: Real>(a: F, b: F) -> F {
    if a == F::neg_infinity() {
        return b;
    }
    if b == F::neg_infinity() {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `ln(Σ exp(x))` over an iterator; `-inf` for an empty one.
pub fn log_sum_exp<F: Real, I: IntoIterator<Item = F>>(values: I) -> F {
    let vals: Vec<F> = values.into_iter().collect();
    let max = vals.iter().copied().fold(F::neg_infinity(), F::max);
    if max == F::neg_infinity() {
        return max;
    }
    let sum: F = vals.iter().map(|&v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Natural log with the [`PROB_FLOOR`] applied: tiny probabilities become `-inf`.
pub fn floored_ln<F: Real>(p: F) -> F {
    if p.as_f64() < PROB_FLOOR {
        F::neg_infinity()
    } else {
        p.ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_add_matches_direct() {
        let a = 0.3f64.ln();
        let b = 0.2f64.ln();
        assert!((log_add(a, b) - 0.5f64.ln()).abs() < 1e-15);
        assert_eq!(log_add(f64::NEG_INFINITY, b), b);
    }

    #[test]
    fn log_sum_exp_empty_is_neg_inf() {
        assert_eq!(log_sum_exp::<f32, _>(Vec::new()), f32::NEG_INFINITY);
        let v = [0.1f64.ln(), 0.2f64.ln(), 0.7f64.ln()];
        assert!(log_sum_exp(v).abs() < 1e-15);
    }

    #[test]
    fn floor_kills_tiny_probabilities() {
        assert_eq!(floored_ln(1e-13f64), f64::NEG_INFINITY);
        assert!(floored_ln(0.5f32).is_finite());
    }
}
