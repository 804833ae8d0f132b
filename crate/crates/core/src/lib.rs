//! Word-level mispronunciation detection over phoneme posteriorgrams.
//!
//! The pipeline decodes an N-best list from each posteriorgram, scores every
//! recognized phoneme against a pronunciation model of native variability,
//! aligns the result with the canonical transcript and flags words whose
//! error probability clears a threshold in every hypothesis.
//!
//! Numeric types are generic over [`scalar::Real`]; the aliases below fix
//! them to `f32` or `f64`.

pub mod align;
pub mod corpus;
pub mod decoder;
pub mod detector;
pub mod eval;
pub mod io_util;
pub mod lexicon;
pub mod pgram;
pub mod phoneme;
pub mod pipeline;
pub mod pm;
pub mod scalar;
pub mod synth;

pub use align::{align, AlignParams, Alignment, OpKind};
pub use corpus::{load_annotations, load_manifest, Cohort, CorpusManifest, ErrorAnnotation};
pub use decoder::{beam_decode, oracle_decode, BeamParams, Hypothesis};
pub use detector::{detect, DetectorConfig, DetectorMode, ThresholdRule, UtteranceDecisions, WordDecision};
pub use eval::{score, sweep, wilson_ci, ConfusionCounts, PRPoint};
pub use lexicon::{CanonicalTranscript, Lexicon};
pub use pgram::{read_posteriorgram, write_posteriorgram, Posteriorgram};
pub use phoneme::{PhonemeId, PhonemeInventory, PhonemeSeq};
pub use pm::{EditTransducer, LikelihoodSeq};
pub use scalar::Real;

pub type Posteriorgram32 = Posteriorgram<f32>;
pub type Posteriorgram64 = Posteriorgram<f64>;
pub type Hypothesis32 = Hypothesis<f32>;
pub type Hypothesis64 = Hypothesis<f64>;
pub type EditTransducer32 = EditTransducer<f32>;
pub type EditTransducer64 = EditTransducer<f64>;
pub type LikelihoodSeq32 = LikelihoodSeq<f32>;
pub type LikelihoodSeq64 = LikelihoodSeq<f64>;
pub type WordDecision32 = WordDecision<f32>;
pub type WordDecision64 = WordDecision<f64>;
pub type PRPoint32 = PRPoint<f32>;
pub type PRPoint64 = PRPoint<f64>;
