//! Corpus-level stages: decode, train the pronunciation model, detect,
//! score. Each stage reads and writes the same files the CLI exposes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::align::AlignParams;
use crate::corpus::{Cohort, CorpusManifest, Utterance};
use crate::decoder::{beam_decode, BeamParams, DecodeError, Hypothesis};
use crate::detector::{detect, DetectError, DetectorConfig, DetectorMode, ThresholdRule, UtteranceDecisions};
use crate::io_util::write_atomic;
use crate::lexicon::{parse_transcript, Lexicon, LexiconError};
use crate::pgram::{read_posteriorgram, PgramError};
use crate::phoneme::{PhonemeInventory, PhonemeSeq};
use crate::pm::{train, EditTransducer, PmError};
use crate::scalar::{Real, Score};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("utterance `{id}`: {source}")]
    Pgram {
        id: String,
        #[source]
        source: PgramError,
    },
    #[error("utterance `{id}`: {source}")]
    Decode {
        id: String,
        #[source]
        source: DecodeError,
    },
    #[error("utterance `{id}`: {source}")]
    Transcript {
        id: String,
        #[source]
        source: LexiconError,
    },
    #[error("utterance `{id}`: {source}")]
    Detect {
        id: String,
        #[source]
        source: DetectError,
    },
    #[error("utterance `{id}`: no N-best list")]
    MissingNBest { id: String },
    #[error("utterance `{id}`: {msg}")]
    NBest { id: String, msg: String },
    #[error("utterance `{id}`: posteriorgram inventory {found} differs from corpus inventory {expected}")]
    InventoryMismatch { id: String, expected: String, found: String },
    #[error("the manifest lists no L1 utterances to train on")]
    EmptyL1Split,
    #[error("empty manifest")]
    EmptyManifest,
    #[error(transparent)]
    Pm(#[from] PmError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("worker pool: {0}")]
    Pool(String),
    #[error("{} utterance(s) failed:\n{}", .0.len(), .0.iter().map(|e| format!("  {e}")).collect::<Vec<_>>().join("\n"))]
    Many(Vec<PipelineError>),
}

impl PipelineError {
    fn many(mut errors: Vec<PipelineError>) -> Self {
        if errors.len() == 1 {
            errors.pop().unwrap()
        } else {
            PipelineError::Many(errors)
        }
    }
}

/// Runs `f` on a pool with `workers` threads (the rayon default when `None`).
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, PipelineError> {
    match workers {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| PipelineError::Pool(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

fn collect_all<T: Send>(results: Vec<Result<T, PipelineError>>) -> Result<Vec<T>, PipelineError> {
    let (ok, err): (Vec<_>, Vec<_>) = results.into_iter().partition(Result::is_ok);
    if err.is_empty() {
        Ok(ok.into_iter().map(Result::unwrap).collect())
    } else {
        Err(PipelineError::many(err.into_iter().map(|e| e.err().unwrap()).collect()))
    }
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), PipelineError> {
    let text = serde_json::to_string_pretty(value).expect("pipeline types serialize");
    write_atomic(path, text.as_bytes()).map_err(|source| PipelineError::Io { path: path.into(), source })
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|source| PipelineError::Io { path: path.into(), source })?;
    serde_json::from_str(&text).map_err(|source| PipelineError::Json { path: path.into(), source })
}

/// Inventory shared by every posteriorgram of the corpus, taken from the first one.
pub fn corpus_inventory(manifest: &CorpusManifest) -> Result<PhonemeInventory, PipelineError> {
    let first = manifest.utterances.first().ok_or(PipelineError::EmptyManifest)?;
    let pg = read_posteriorgram::<f64>(&manifest.pgram_path(first))
        .map_err(|source| PipelineError::Pgram { id: first.id.clone(), source })?;
    PhonemeInventory::new(pg.labels()).map_err(|e| PipelineError::Pgram { id: first.id.clone(), source: e.into() })
}

/// Provenance header of an N-best file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeHeader {
    pub beam_width: usize,
    pub n_best: usize,
    pub min_phoneme_prob: f64,
    /// How per-phoneme posteriors were taken from the frames.
    pub posterior: String,
    pub inventory_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct NBestEntry<F: Real = f64> {
    pub phonemes: Vec<String>,
    pub log_weight: F,
    pub log_path_sum: F,
    pub emit_frames: Vec<usize>,
    pub pos_posteriors: Vec<Vec<F>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct NBestFile<F: Real = f64> {
    pub config: DecodeHeader,
    pub id: String,
    pub labels: Vec<String>,
    pub hypotheses: Vec<NBestEntry<F>>,
}

impl<F: Real> NBestFile<F> {
    pub fn new(id: &str, inventory: &PhonemeInventory, params: &BeamParams, hyps: &[Hypothesis<F>]) -> Self {
        Self {
            config: DecodeHeader {
                beam_width: params.beam_width,
                n_best: params.n_best,
                min_phoneme_prob: params.min_phoneme_prob,
                posterior: "emit-frame".into(),
                inventory_hash: inventory.hash(),
            },
            id: id.to_string(),
            labels: inventory.labels().to_vec(),
            hypotheses: hyps
                .iter()
                .map(|h| NBestEntry {
                    phonemes: h.seq.iter().map(|&p| inventory.label(p).to_string()).collect(),
                    log_weight: h.log_weight,
                    log_path_sum: h.log_path_sum,
                    emit_frames: h.emit_frames.clone(),
                    pos_posteriors: h.pos_posteriors.clone(),
                })
                .collect(),
        }
    }

    pub fn hypotheses(&self, inventory: &PhonemeInventory) -> Result<Vec<Hypothesis<F>>, PipelineError> {
        let err = |msg: String| PipelineError::NBest { id: self.id.clone(), msg };
        if self.config.inventory_hash != inventory.hash() {
            return Err(err(format!("inventory {} differs from {}", self.config.inventory_hash, inventory.hash())));
        }
        self.hypotheses
            .iter()
            .map(|e| {
                let seq = inventory.parse_seq(&e.phonemes.join(" ")).map_err(|x| err(x.to_string()))?;
                if e.emit_frames.len() != seq.len()
                    || e.pos_posteriors.len() != seq.len()
                    || e.pos_posteriors.iter().any(|r| r.len() != inventory.size())
                {
                    return Err(err("hypothesis fields have inconsistent lengths".into()));
                }
                Ok(Hypothesis {
                    seq,
                    log_weight: e.log_weight,
                    log_path_sum: e.log_path_sum,
                    emit_frames: e.emit_frames.clone(),
                    pos_posteriors: e.pos_posteriors.clone(),
                })
            })
            .collect()
    }
}

pub fn nbest_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.nbest.json"))
}

pub type NBestMap<F> = BTreeMap<String, Vec<Hypothesis<F>>>;

/// Decodes every utterance. All failures are collected, each naming its utterance.
pub fn decode_corpus<F: Real>(
    manifest: &CorpusManifest,
    inventory: &PhonemeInventory,
    params: &BeamParams,
) -> Result<NBestMap<F>, PipelineError> {
    let results: Vec<_> = manifest
        .utterances
        .par_iter()
        .map(|u| decode_utterance::<F>(manifest, u, inventory, params).map(|h| (u.id.clone(), h)))
        .collect();
    Ok(collect_all(results)?.into_iter().collect())
}

pub fn decode_utterance<F: Real>(
    manifest: &CorpusManifest,
    utt: &Utterance,
    inventory: &PhonemeInventory,
    params: &BeamParams,
) -> Result<Vec<Hypothesis<F>>, PipelineError> {
    let pg = read_posteriorgram::<F>(&manifest.pgram_path(utt))
        .map_err(|source| PipelineError::Pgram { id: utt.id.clone(), source })?;
    if pg.inventory_hash() != inventory.hash() {
        return Err(PipelineError::InventoryMismatch {
            id: utt.id.clone(),
            expected: inventory.hash(),
            found: pg.inventory_hash().to_string(),
        });
    }
    beam_decode(&pg, params).map_err(|source| PipelineError::Decode { id: utt.id.clone(), source })
}

pub fn write_nbest<F: Real>(
    dir: &Path,
    nbest: &NBestMap<F>,
    inventory: &PhonemeInventory,
    params: &BeamParams,
) -> Result<(), PipelineError> {
    std::fs::create_dir_all(dir).map_err(|source| PipelineError::Io { path: dir.into(), source })?;
    let results: Vec<_> = nbest
        .par_iter()
        .map(|(id, hyps)| write_json(&NBestFile::new(id, inventory, params, hyps), &nbest_path(dir, id)))
        .collect();
    collect_all(results).map(|_| ())
}

/// Loads the N-best list of every manifest utterance from `dir`.
pub fn read_nbest<F: Real>(
    dir: &Path,
    manifest: &CorpusManifest,
    inventory: &PhonemeInventory,
) -> Result<NBestMap<F>, PipelineError> {
    let results: Vec<_> = manifest
        .utterances
        .par_iter()
        .map(|u| {
            let path = nbest_path(dir, &u.id);
            if !path.is_file() {
                return Err(PipelineError::MissingNBest { id: u.id.clone() });
            }
            let file: NBestFile<F> = read_json(&path)?;
            Ok((u.id.clone(), file.hypotheses(inventory)?))
        })
        .collect();
    Ok(collect_all(results)?.into_iter().collect())
}

/// (canonical, top-1 decoded) pairs of the L1 utterances.
pub fn l1_training_pairs<F: Real>(
    manifest: &CorpusManifest,
    nbest: &NBestMap<F>,
    lexicon: &Lexicon,
) -> Result<Vec<(PhonemeSeq, PhonemeSeq)>, PipelineError> {
    let results: Vec<_> = manifest
        .cohort(Cohort::L1)
        .map(|u| {
            let transcript = parse_transcript(&u.text, lexicon)
                .map_err(|source| PipelineError::Transcript { id: u.id.clone(), source })?;
            let hyps = nbest.get(&u.id).ok_or_else(|| PipelineError::MissingNBest { id: u.id.clone() })?;
            let top = hyps.first().ok_or_else(|| PipelineError::MissingNBest { id: u.id.clone() })?;
            Ok((transcript.flattened().clone(), top.seq.clone()))
        })
        .collect();
    let pairs = collect_all(results)?;
    if pairs.is_empty() {
        return Err(PipelineError::EmptyL1Split);
    }
    Ok(pairs)
}

pub fn train_pm_from_corpus<F: Real, S: Score>(
    manifest: &CorpusManifest,
    nbest: &NBestMap<F>,
    lexicon: &Lexicon,
    inventory: &PhonemeInventory,
    smoothing_k: F,
    align: &AlignParams<S>,
) -> Result<EditTransducer<F>, PipelineError> {
    let pairs = l1_training_pairs(manifest, nbest, lexicon)?;
    Ok(train(inventory, &pairs, smoothing_k, align)?)
}

/// Provenance header of a decisions file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectHeader {
    pub mode: DetectorMode,
    pub threshold: f64,
    pub n: usize,
    pub rule: ThresholdRule,
    pub pm: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DecisionsFile<F: Real = f64> {
    pub config: DetectHeader,
    pub utterances: Vec<UtteranceDecisions<F>>,
}

impl<F: Real> DecisionsFile<F> {
    pub fn save(&self, path: &Path) -> Result<(), PipelineError> {
        write_json(self, path)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        read_json(path)
    }
}

#[derive(Debug, Clone)]
pub struct DetectionRun<F: Real = f64> {
    pub decisions: Vec<UtteranceDecisions<F>>,
    /// Utterances with fewer hypotheses than requested; `n` was lowered for them.
    pub clamped: Vec<(String, usize)>,
}

/// Runs the detector over every manifest utterance.
pub fn detect_corpus<F: Real, S: Score>(
    manifest: &CorpusManifest,
    nbest: &NBestMap<F>,
    lexicon: &Lexicon,
    inventory: &PhonemeInventory,
    transducer: Option<&EditTransducer<F>>,
    config: &DetectorConfig<F, S>,
) -> Result<DetectionRun<F>, PipelineError> {
    if config.mode == DetectorMode::Pm && transducer.is_none() {
        return Err(PipelineError::Detect { id: String::new(), source: DetectError::MissingTransducer });
    }
    let results: Vec<_> = manifest
        .utterances
        .par_iter()
        .map(|u| {
            let id = || u.id.clone();
            let transcript =
                parse_transcript(&u.text, lexicon).map_err(|source| PipelineError::Transcript { id: id(), source })?;
            let hyps = nbest.get(&u.id).ok_or_else(|| PipelineError::MissingNBest { id: id() })?;
            let available = hyps.len();
            let mut local = config.clone();
            let clamped = (available > 0 && config.n > available).then(|| (id(), available));
            if clamped.is_some() {
                local.n = available;
            }
            let words = detect(hyps, &transcript, inventory, transducer, &local)
                .map_err(|source| PipelineError::Detect { id: id(), source })?;
            Ok((UtteranceDecisions { id: id(), words }, clamped))
        })
        .collect();
    let (decisions, clamped): (Vec<_>, Vec<_>) = collect_all(results)?.into_iter().unzip();
    Ok(DetectionRun { decisions, clamped: clamped.into_iter().flatten().collect() })
}
