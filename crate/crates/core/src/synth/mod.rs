//! Seeded synthetic corpora: native pronunciation variability, L2 error
//! injection with word labels, and noisy posteriorgram emission.

mod config;

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Geometric, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use config::{ConfusionSpec, CorpusSizes, EmissionSpec, ErrorSpec, SynthConfig, VariantSpec, WordSpec};

use crate::corpus::{save_annotations, save_manifest, Cohort, CorpusError, CorpusManifest, ErrorAnnotation, Utterance};
use crate::io_util::write_atomic;
use crate::lexicon::Lexicon;
use crate::pgram::{write_posteriorgram, PgramError, Posteriorgram};
use crate::phoneme::{InventoryError, PhonemeId, PhonemeInventory, PhonemeSeq};
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("word `{0}` has no pronunciation in the variability model")]
    UncoveredWord(String),
    #[error("invalid generator config: {0}")]
    Config(String),
    #[error(transparent)]
    Inventory(#[from] InventoryError),
    #[error(transparent)]
    Pgram(#[from] PgramError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("{0}: {1}")]
    Io(PathBuf, #[source] std::io::Error),
}

fn bad(msg: impl Into<String>) -> SynthError {
    SynthError::Config(msg.into())
}

/// Alternate native pronunciations per word plus cross-word linking.
#[derive(Debug, Clone, PartialEq)]
pub struct VariabilityModel {
    variants: BTreeMap<String, Vec<(PhonemeSeq, f64)>>,
    p_link: f64,
}

impl VariabilityModel {
    pub fn new(variants: BTreeMap<String, Vec<(PhonemeSeq, f64)>>, p_link: f64) -> Result<Self, SynthError> {
        if !(0.0..=1.0).contains(&p_link) {
            return Err(bad(format!("p_link {p_link} outside [0, 1]")));
        }
        for (word, vs) in &variants {
            let total: f64 = vs.iter().map(|v| v.1).sum();
            if vs.is_empty() || vs.iter().any(|(s, p)| s.is_empty() || !(*p >= 0.0)) || (total - 1.0).abs() > 1e-9 {
                return Err(bad(format!("variants of `{word}` must be non-empty with probabilities summing to 1")));
            }
        }
        Ok(Self { variants, p_link })
    }

    pub fn variants(&self, word: &str) -> Option<&[(PhonemeSeq, f64)]> {
        self.variants.get(word).map(Vec::as_slice)
    }

    pub fn p_link(&self) -> f64 {
        self.p_link
    }

    /// Lexicon listing every word's variants, most canonical first.
    pub fn lexicon(&self) -> Lexicon {
        let mut lex = Lexicon::new();
        for (word, vs) in &self.variants {
            for (seq, _) in vs {
                lex.insert(word.clone(), seq.clone());
            }
        }
        lex
    }
}

/// A realized phoneme sequence with the transcript word each phoneme belongs to.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Realization {
    pub phonemes: Vec<PhonemeId>,
    pub word_of: Vec<usize>,
}

impl Realization {
    pub fn segment(&self, word: usize) -> Vec<PhonemeId> {
        self.phonemes.iter().zip(&self.word_of).filter(|(_, &k)| k == word).map(|(&p, _)| p).collect()
    }

    fn from_segments(segments: &[Vec<PhonemeId>]) -> Self {
        let mut out = Realization::default();
        for (k, seg) in segments.iter().enumerate() {
            out.phonemes.extend_from_slice(seg);
            out.word_of.extend(std::iter::repeat_n(k, seg.len()));
        }
        out
    }
}

/// Draws a native realization: one variant per word, and with probability
/// `p_link` a word-initial phoneme identical to the previous phoneme is merged
/// into it.
pub fn sample_native<R: Rng + ?Sized>(
    words: &[String],
    variability: &VariabilityModel,
    rng: &mut R,
) -> Result<Realization, SynthError> {
    let mut out = Realization::default();
    for (k, word) in words.iter().enumerate() {
        let vs = variability.variants(word).ok_or_else(|| SynthError::UncoveredWord(word.clone()))?;
        let pick = if vs.len() == 1 {
            0
        } else {
            WeightedIndex::new(vs.iter().map(|v| v.1)).expect("validated weights").sample(rng)
        };
        let seq = &vs[pick].0;
        let mut skip = 0;
        if seq.len() >= 2 && out.phonemes.last() == Some(&seq[0]) && rng.random::<f64>() < variability.p_link {
            skip = 1;
        }
        for &p in &seq[skip..] {
            out.phonemes.push(p);
            out.word_of.push(k);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorKind {
    Substitution,
    Deletion,
    Insertion,
}

/// One injected error, positions relative to the word's native segment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InjectedError {
    pub word_index: usize,
    pub kind: ErrorKind,
    pub position: usize,
    pub from: Option<String>,
    pub to: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorModel {
    pub word_error_rate: f64,
    /// Substitution, deletion, insertion.
    pub shares: [f64; 3],
    confusions: HashMap<PhonemeId, Vec<(PhonemeId, f64)>>,
    content: Vec<PhonemeId>,
}

impl ErrorModel {
    pub fn new(
        inventory: &PhonemeInventory,
        word_error_rate: f64,
        shares: [f64; 3],
        confusions: &[(PhonemeId, PhonemeId, f64)],
    ) -> Result<Self, SynthError> {
        if !(0.0..=1.0).contains(&word_error_rate) {
            return Err(bad(format!("word_error_rate {word_error_rate} outside [0, 1]")));
        }
        if shares.iter().any(|s| !(0.0..=1.0).contains(s)) || (shares.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(bad("error shares must lie in [0, 1] and sum to 1"));
        }
        let content: Vec<PhonemeId> = inventory.phonemes().filter(|&p| !inventory.is_silence(p)).collect();
        if content.len() < 2 {
            return Err(bad("need at least two content phonemes"));
        }
        let mut table: HashMap<PhonemeId, Vec<(PhonemeId, f64)>> = HashMap::new();
        for &(from, to, w) in confusions {
            if from == to || !(w > 0.0) || !content.contains(&from) || !content.contains(&to) {
                return Err(bad("confusions must map a content phoneme to a different one with positive weight"));
            }
            table.entry(from).or_default().push((to, w));
        }
        Ok(Self { word_error_rate, shares, confusions: table, content })
    }

    fn substitute<R: Rng + ?Sized>(&self, p: PhonemeId, rng: &mut R) -> PhonemeId {
        match self.confusions.get(&p) {
            Some(targets) => targets[WeightedIndex::new(targets.iter().map(|t| t.1)).expect("positive").sample(rng)].0,
            None => {
                let others: Vec<PhonemeId> = self.content.iter().copied().filter(|&q| q != p).collect();
                others[rng.random_range(0..others.len())]
            }
        }
    }

    fn perturb<R: Rng + ?Sized>(&self, seg: &[PhonemeId], rng: &mut R) -> (Vec<PhonemeId>, ErrorKind, usize, Option<PhonemeId>, Option<PhonemeId>) {
        let mut kind = match WeightedIndex::new(self.shares).expect("validated shares").sample(rng) {
            0 => ErrorKind::Substitution,
            1 => ErrorKind::Deletion,
            _ => ErrorKind::Insertion,
        };
        if kind == ErrorKind::Deletion && seg.len() < 2 {
            kind = ErrorKind::Substitution;
        }
        let mut out = seg.to_vec();
        match kind {
            ErrorKind::Substitution => {
                let i = rng.random_range(0..seg.len());
                let to = self.substitute(seg[i], rng);
                out[i] = to;
                (out, kind, i, Some(seg[i]), Some(to))
            }
            ErrorKind::Deletion => {
                let i = rng.random_range(0..seg.len());
                out.remove(i);
                (out, kind, i, Some(seg[i]), None)
            }
            ErrorKind::Insertion => {
                // Never before the word's first phoneme, so the inserted
                // phoneme follows a phoneme of the same word.
                let i = rng.random_range(1..=seg.len());
                let p = self.content[rng.random_range(0..self.content.len())];
                out.insert(i, p);
                (out, kind, i, None, Some(p))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Injected {
    pub realized: Realization,
    pub labels: Vec<u8>,
    pub errors: Vec<InjectedError>,
}

/// Perturbs each word with probability `word_error_rate`. A perturbation that
/// would reproduce a native variant of the word is redrawn, so every labeled
/// word differs from all native forms.
pub fn inject_errors<R: Rng + ?Sized>(
    native: &Realization,
    words: &[String],
    model: &ErrorModel,
    variability: &VariabilityModel,
    inventory: &PhonemeInventory,
    rng: &mut R,
) -> Result<Injected, SynthError> {
    let mut segments: Vec<Vec<PhonemeId>> = (0..words.len()).map(|k| native.segment(k)).collect();
    let mut labels = vec![0u8; words.len()];
    let mut errors = Vec::new();
    for (k, word) in words.iter().enumerate() {
        if !(rng.random::<f64>() < model.word_error_rate) {
            continue;
        }
        let vs = variability.variants(word).ok_or_else(|| SynthError::UncoveredWord(word.clone()))?;
        let is_native = |s: &[PhonemeId]| vs.iter().any(|(v, _)| v.ids() == s || v.ids().get(1..) == Some(s));
        for _ in 0..100 {
            let (seg, kind, position, from, to) = model.perturb(&segments[k], rng);
            if seg == segments[k] || is_native(&seg) {
                continue;
            }
            segments[k] = seg;
            labels[k] = 1;
            errors.push(InjectedError {
                word_index: k,
                kind,
                position,
                from: from.map(|p| inventory.label(p).to_string()),
                to: to.map(|p| inventory.label(p).to_string()),
            });
            break;
        }
    }
    Ok(Injected { realized: Realization::from_segments(&segments), labels, errors })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmissionModel {
    pub mean_duration: f64,
    pub alpha: f64,
    pub alpha_concentration: Option<f64>,
    pub spread: f64,
    close: Vec<Vec<PhonemeId>>,
    pub blank_rate: f64,
    pub blank_mass: f64,
    pub frame_jitter: f64,
    pub frame_step_ms: f64,
}

impl EmissionModel {
    pub fn new(inventory: &PhonemeInventory, spec: &EmissionSpec) -> Result<Self, SynthError> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !(spec.mean_duration >= 1.0) {
            return Err(bad("mean_duration must be at least 1"));
        }
        if !(spec.alpha > 0.0 && spec.alpha <= 1.0) {
            return Err(bad(format!("alpha {} outside (0, 1]", spec.alpha)));
        }
        if spec.alpha_concentration.is_some_and(|c| !(c > 0.0)) {
            return Err(bad("alpha_concentration must be positive"));
        }
        if !unit(spec.spread) || !unit(spec.blank_rate) || !unit(spec.blank_mass) || !(spec.frame_jitter >= 0.0) {
            return Err(bad("spread, blank_rate and blank_mass must lie in [0, 1], frame_jitter non-negative"));
        }
        let mut close = vec![Vec::new(); inventory.size()];
        for [a, b] in &spec.close_pairs {
            let lookup = |l: &str| inventory.id(l).filter(|&p| p != inventory.blank()).ok_or_else(|| bad(format!("unknown phoneme `{l}`")));
            let (a, b) = (lookup(a)?, lookup(b)?);
            if a == b {
                return Err(bad("a phoneme cannot be close to itself"));
            }
            for (x, y) in [(a, b), (b, a)] {
                if !close[x.index()].contains(&y) {
                    close[x.index()].push(y);
                }
            }
        }
        for c in &mut close {
            c.sort();
        }
        Ok(Self {
            mean_duration: spec.mean_duration,
            alpha: spec.alpha,
            alpha_concentration: spec.alpha_concentration,
            spread: spec.spread,
            close,
            blank_rate: spec.blank_rate,
            blank_mass: spec.blank_mass,
            frame_jitter: spec.frame_jitter,
            frame_step_ms: spec.frame_step_ms,
        })
    }

    pub fn close(&self, p: PhonemeId) -> &[PhonemeId] {
        &self.close[p.index()]
    }

    /// Target mass for one phoneme slot.
    pub fn sample_alpha<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.alpha_concentration {
            Some(c) if self.alpha < 1.0 => {
                Beta::new(self.alpha * c, (1.0 - self.alpha) * c).expect("validated").sample(rng)
            }
            _ => self.alpha,
        }
    }

    fn jittered<R: Rng + ?Sized>(&self, base: &mut [f64], mass: f64, rng: &mut R) {
        if mass <= 0.0 {
            base.iter_mut().for_each(|v| *v = 0.0);
            return;
        }
        for v in base.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v *= (self.frame_jitter * z).exp();
        }
        let total: f64 = base.iter().sum();
        if total > 0.0 {
            base.iter_mut().for_each(|v| *v *= mass / total);
        }
    }

    fn phoneme_row<R: Rng + ?Sized>(&self, inventory: &PhonemeInventory, p: PhonemeId, alpha: f64, rng: &mut R) -> Vec<f64> {
        let size = inventory.size();
        let close = self.close(p);
        let rest: Vec<PhonemeId> = inventory.phonemes().filter(|&q| q != p && !close.contains(&q)).collect();
        let off = 1.0 - alpha;
        let (close_mass, rest_mass) = match (close.is_empty(), rest.is_empty()) {
            (true, _) => (0.0, off),
            (false, true) => (off, 0.0),
            (false, false) => (off * self.spread, off * (1.0 - self.spread)),
        };
        let mut others: Vec<f64> = close
            .iter()
            .map(|_| close_mass / close.len() as f64)
            .chain(rest.iter().map(|_| rest_mass / rest.len().max(1) as f64))
            .collect();
        self.jittered(&mut others, off, rng);
        let mut row = vec![0.0; size + 1];
        row[p.index()] = alpha;
        for (q, v) in close.iter().chain(&rest).zip(others) {
            row[q.index()] = v;
        }
        row
    }

    fn blank_row<R: Rng + ?Sized>(&self, inventory: &PhonemeInventory, rng: &mut R) -> Vec<f64> {
        let size = inventory.size();
        let off = 1.0 - self.blank_mass;
        let mut others = vec![off / size as f64; size];
        self.jittered(&mut others, off, rng);
        others.push(self.blank_mass);
        others
    }

    fn duration<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        if self.mean_duration <= 1.0 {
            return 1;
        }
        1 + Geometric::new(1.0 / self.mean_duration).expect("validated").sample(rng) as usize
    }
}

/// Emits a posteriorgram for `seq` with per-slot target masses drawn from the model.
pub fn emit_posteriorgram<F: Real, R: Rng + ?Sized>(
    seq: &[PhonemeId],
    model: &EmissionModel,
    inventory: &PhonemeInventory,
    rng: &mut R,
) -> Result<Posteriorgram<F>, SynthError> {
    let alphas: Vec<f64> = seq.iter().map(|_| model.sample_alpha(rng)).collect();
    emit_with_alphas(seq, &alphas, model, inventory, rng)
}

/// Emits a posteriorgram using the given target mass for each phoneme slot.
///
/// Each slot lasts a geometric number of frames, one of which carries the
/// phoneme posterior while the others are blank frames. Identical adjacent
/// phonemes are always separated by an extra blank frame, different ones with
/// probability `blank_rate`.
pub fn emit_with_alphas<F: Real, R: Rng + ?Sized>(
    seq: &[PhonemeId],
    alphas: &[f64],
    model: &EmissionModel,
    inventory: &PhonemeInventory,
    rng: &mut R,
) -> Result<Posteriorgram<F>, SynthError> {
    if alphas.len() != seq.len() {
        return Err(bad("one alpha per phoneme slot"));
    }
    if alphas.iter().any(|&a| !(a > 0.0 && a <= 1.0)) {
        return Err(bad("slot alpha outside (0, 1]"));
    }
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, (&p, &alpha)) in seq.iter().zip(alphas).enumerate() {
        if p.index() >= inventory.size() {
            return Err(SynthError::Inventory(InventoryError::BlankInSequence));
        }
        if i > 0 && (seq[i - 1] == p || rng.random::<f64>() < model.blank_rate) {
            rows.push(model.blank_row(inventory, rng));
        }
        let duration = model.duration(rng);
        let peak = rng.random_range(0..duration);
        for t in 0..duration {
            rows.push(if t == peak { model.phoneme_row(inventory, p, alpha, rng) } else { model.blank_row(inventory, rng) });
        }
    }
    let rows = rows.into_iter().map(|r| r.into_iter().map(F::from_f64_lossy).collect()).collect();
    Ok(Posteriorgram::from_inventory(inventory, rows, model.frame_step_ms)?)
}

/// Everything the generator needs, resolved against the inventory.
#[derive(Debug, Clone)]
pub struct SynthModels {
    pub inventory: PhonemeInventory,
    pub variability: VariabilityModel,
    pub errors: ErrorModel,
    pub emission: EmissionModel,
    /// Lexicon words in config order.
    pub words: Vec<String>,
}

impl SynthConfig {
    pub fn build(&self) -> Result<SynthModels, SynthError> {
        let inventory = PhonemeInventory::new(&self.inventory)?;
        let mut variants = BTreeMap::new();
        let mut words = Vec::new();
        for w in &self.lexicon {
            let word = w.word.to_lowercase();
            if word.is_empty() || word.chars().any(char::is_whitespace) {
                return Err(bad(format!("bad word `{}`", w.word)));
            }
            let vs = w
                .variants
                .iter()
                .map(|v| Ok((inventory.parse_seq(&v.pron)?, v.prob)))
                .collect::<Result<Vec<_>, SynthError>>()?;
            if variants.insert(word.clone(), vs).is_some() {
                return Err(bad(format!("duplicate word `{word}`")));
            }
            words.push(word);
        }
        if words.is_empty() {
            return Err(bad("empty lexicon"));
        }
        let [lo, hi] = self.words_per_utterance;
        if lo == 0 || hi < lo {
            return Err(bad("words_per_utterance must be [min, max] with 1 <= min <= max"));
        }
        let variability = VariabilityModel::new(variants, self.p_link)?;
        let id = |l: &str| inventory.id(l).ok_or_else(|| bad(format!("unknown phoneme `{l}`")));
        let confusions = self
            .errors
            .confusions
            .iter()
            .map(|c| Ok((id(&c.from)?, id(&c.to)?, c.weight)))
            .collect::<Result<Vec<_>, SynthError>>()?;
        let e = &self.errors;
        let errors = ErrorModel::new(
            &inventory,
            e.word_error_rate,
            [e.substitution_share, e.deletion_share, e.insertion_share],
            &confusions,
        )?;
        let emission = EmissionModel::new(&inventory, &self.emission)?;
        Ok(SynthModels { inventory, variability, errors, emission, words })
    }
}

/// Per-utterance generator stream derived from the master seed and the id.
pub fn utterance_rng(seed: u64, id: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(id.as_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

/// Generator bookkeeping for one utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceTruth {
    pub id: String,
    pub cohort: Cohort,
    pub text: String,
    pub native: String,
    pub realized: String,
    pub labels: Vec<u8>,
    pub errors: Vec<InjectedError>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TruthFile {
    utterances: Vec<UtteranceTruth>,
}

pub struct SyntheticUtterance<F: Real = f64> {
    pub truth: UtteranceTruth,
    pub pgram: Posteriorgram<F>,
}

/// Generates one utterance deterministically from `(seed, id)`.
pub fn generate_utterance<F: Real>(
    models: &SynthModels,
    words_per_utterance: [usize; 2],
    seed: u64,
    id: &str,
    cohort: Cohort,
) -> Result<SyntheticUtterance<F>, SynthError> {
    let mut rng = utterance_rng(seed, id);
    let count = rng.random_range(words_per_utterance[0]..=words_per_utterance[1]);
    let words: Vec<String> = (0..count).map(|_| models.words[rng.random_range(0..models.words.len())].clone()).collect();
    let native = sample_native(&words, &models.variability, &mut rng)?;
    let injected = match cohort {
        Cohort::L1 => Injected { realized: native.clone(), labels: vec![0; words.len()], errors: Vec::new() },
        Cohort::L2 => inject_errors(&native, &words, &models.errors, &models.variability, &models.inventory, &mut rng)?,
    };
    let pgram = emit_posteriorgram(&injected.realized.phonemes, &models.emission, &models.inventory, &mut rng)?;
    let inv = &models.inventory;
    Ok(SyntheticUtterance {
        truth: UtteranceTruth {
            id: id.to_string(),
            cohort,
            text: words.join(" "),
            native: inv.format_seq(&native.phonemes),
            realized: inv.format_seq(&injected.realized.phonemes),
            labels: injected.labels,
            errors: injected.errors,
        },
        pgram,
    })
}

/// What [`generate_corpus`] wrote.
#[derive(Debug, Clone)]
pub struct GeneratedCorpus {
    pub manifest: CorpusManifest,
    pub annotations: Vec<ErrorAnnotation>,
    pub truth: Vec<UtteranceTruth>,
    pub manifest_path: PathBuf,
    pub annotations_path: PathBuf,
    pub lexicon_path: PathBuf,
}

pub fn utterance_ids(sizes: CorpusSizes) -> Vec<(String, Cohort)> {
    (0..sizes.train_l1)
        .map(|i| (format!("l1_{i:04}"), Cohort::L1))
        .chain((0..sizes.test_l2).map(|i| (format!("l2_{i:04}"), Cohort::L2)))
        .collect()
}

/// Writes `lexicon.txt`, `config.json`, `pgram/<id>.pgram`, `manifest.json`,
/// `annotations.json` (L2 utterances only) and `truth.json` under `out_dir`.
pub fn generate_corpus(config: &SynthConfig, out_dir: &Path) -> Result<GeneratedCorpus, SynthError> {
    let models = config.build()?;
    let pgram_dir = out_dir.join("pgram");
    std::fs::create_dir_all(&pgram_dir).map_err(|e| SynthError::Io(pgram_dir.clone(), e))?;
    let ids = utterance_ids(config.sizes);
    let generated = ids
        .par_iter()
        .map(|(id, cohort)| {
            let utt = generate_utterance::<f64>(&models, config.words_per_utterance, config.seed, id, *cohort)?;
            write_posteriorgram(&utt.pgram, &pgram_dir.join(format!("{id}.pgram")))?;
            Ok(utt.truth)
        })
        .collect::<Result<Vec<_>, SynthError>>()?;

    let manifest = CorpusManifest {
        utterances: generated
            .iter()
            .enumerate()
            .map(|(i, t)| Utterance {
                id: t.id.clone(),
                pgram: format!("pgram/{}.pgram", t.id),
                text: t.text.clone(),
                speaker: format!("{}_spk{:02}", if t.cohort == Cohort::L1 { "l1" } else { "l2" }, i % 10),
                cohort: t.cohort,
            })
            .collect(),
        root: out_dir.to_path_buf(),
    };
    let annotations: Vec<ErrorAnnotation> = generated
        .iter()
        .filter(|t| t.cohort == Cohort::L2)
        .map(|t| ErrorAnnotation { id: t.id.clone(), labels: t.labels.clone() })
        .collect();

    let write = |name: &str, text: String| {
        let path = out_dir.join(name);
        write_atomic(&path, text.as_bytes()).map_err(|e| SynthError::Io(path.clone(), e))?;
        Ok::<PathBuf, SynthError>(path)
    };
    let lexicon_path = write("lexicon.txt", models.variability.lexicon().to_text(&models.inventory))?;
    write("config.json", config.to_json())?;
    write(
        "truth.json",
        serde_json::to_string_pretty(&TruthFile { utterances: generated.clone() }).expect("truth serializes"),
    )?;
    let manifest_path = out_dir.join("manifest.json");
    save_manifest(&manifest, &manifest_path)?;
    let annotations_path = out_dir.join("annotations.json");
    save_annotations(&annotations, &annotations_path)?;
    Ok(GeneratedCorpus { manifest, annotations, truth: generated, manifest_path, annotations_path, lexicon_path })
}

/// Reads the `truth.json` bookkeeping written by [`generate_corpus`].
pub fn load_truth(path: &Path) -> Result<Vec<UtteranceTruth>, SynthError> {
    let text = std::fs::read_to_string(path).map_err(|e| SynthError::Io(path.into(), e))?;
    let file: TruthFile = serde_json::from_str(&text).map_err(|e| bad(format!("{}: {e}", path.display())))?;
    Ok(file.utterances)
}
