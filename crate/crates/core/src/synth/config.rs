use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SynthError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSpec {
    pub pron: String,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordSpec {
    pub word: String,
    /// First entry is the canonical pronunciation.
    pub variants: Vec<VariantSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionSpec {
    pub from: String,
    pub to: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSpec {
    pub word_error_rate: f64,
    pub substitution_share: f64,
    pub deletion_share: f64,
    pub insertion_share: f64,
    pub confusions: Vec<ConfusionSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmissionSpec {
    /// Mean frames per phoneme (geometric, at least 1).
    pub mean_duration: f64,
    /// Mean posterior mass on the spoken phoneme.
    pub alpha: f64,
    /// Beta concentration of the per-slot mass; `None` fixes every slot at `alpha`.
    pub alpha_concentration: Option<f64>,
    /// Share of the remaining mass given to acoustically close phonemes.
    pub spread: f64,
    /// Unordered pairs of acoustically close phonemes.
    pub close_pairs: Vec<[String; 2]>,
    /// Chance of a blank frame between two different phonemes.
    pub blank_rate: f64,
    /// Blank posterior on blank frames.
    pub blank_mass: f64,
    /// Log-normal jitter on off-target frame mass.
    pub frame_jitter: f64,
    pub frame_step_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSizes {
    pub train_l1: usize,
    pub test_l2: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub inventory: Vec<String>,
    pub lexicon: Vec<WordSpec>,
    pub p_link: f64,
    pub errors: ErrorSpec,
    pub emission: EmissionSpec,
    pub sizes: CorpusSizes,
    pub words_per_utterance: [usize; 2],
    pub seed: u64,
}

impl SynthConfig {
    pub fn load(path: &Path) -> Result<Self, SynthError> {
        let text = std::fs::read_to_string(path).map_err(|e| SynthError::Io(path.into(), e))?;
        serde_json::from_str(&text).map_err(|e| SynthError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

const WORDS: &[(&str, &[(&str, f64)])] = &[
    ("enough", &[("ih n ah f", 0.5), ("ax n ah f", 0.5)]),
    ("said", &[("s eh d", 1.0)]),
    ("her", &[("hh er", 0.7), ("hh ax", 0.3)]),
    ("head", &[("hh eh d", 1.0)]),
    ("set", &[("s eh t", 1.0)]),
    ("ten", &[("t eh n", 1.0)]),
    ("den", &[("d eh n", 1.0)]),
    ("fed", &[("f eh d", 1.0)]),
    ("stuff", &[("s t ah f", 1.0)]),
    ("done", &[("d ah n", 0.7), ("d ax n", 0.3)]),
    ("fun", &[("f ah n", 1.0)]),
    ("sun", &[("s ah n", 1.0)]),
    ("nut", &[("n ah t", 1.0)]),
    ("hut", &[("hh ah t", 1.0)]),
    ("tough", &[("t ah f", 1.0)]),
    ("dust", &[("d ah s t", 1.0)]),
    ("fist", &[("f ih s t", 1.0)]),
    ("hint", &[("hh ih n t", 1.0)]),
    ("sit", &[("s ih t", 1.0)]),
    ("tin", &[("t ih n", 1.0)]),
    ("fin", &[("f ih n", 1.0)]),
    ("hid", &[("hh ih d", 1.0)]),
    ("dense", &[("d eh n s", 1.0)]),
    ("nest", &[("n eh s t", 1.0)]),
    ("tent", &[("t eh n t", 1.0)]),
    ("sent", &[("s eh n t", 1.0)]),
    ("dent", &[("d eh n t", 1.0)]),
    ("stern", &[("s t er n", 1.0)]),
    ("fern", &[("f er n", 1.0)]),
    ("hurt", &[("hh er t", 1.0)]),
    ("turn", &[("t er n", 1.0)]),
    ("nerd", &[("n er d", 1.0)]),
    ("earn", &[("er n", 1.0)]),
    ("eight", &[("ey t", 1.0)]),
    ("faint", &[("f ey n t", 1.0)]),
    ("haste", &[("hh ey s t", 1.0)]),
    ("taste", &[("t ey s t", 1.0)]),
    ("stain", &[("s t ey n", 1.0)]),
    ("date", &[("d ey t", 1.0)]),
    ("fade", &[("f ey d", 1.0)]),
    ("hate", &[("hh ey t", 1.0)]),
    ("sister", &[("s ih s t er", 0.6), ("s ih s t ax", 0.4)]),
    ("tender", &[("t eh n d er", 0.6), ("t eh n d ax", 0.4)]),
    ("under", &[("ah n d er", 0.6), ("ah n d ax", 0.4)]),
    ("attend", &[("ih t eh n d", 0.4), ("ax t eh n d", 0.6)]),
    ("ahead", &[("ih hh eh d", 0.4), ("ax hh eh d", 0.6)]),
    ("an", &[("ax n", 0.6), ("ah n", 0.4)]),
    ("heifer", &[("hh eh f er", 1.0)]),
    ("deft", &[("d eh f t", 1.0)]),
    ("sniff", &[("s n ih f", 1.0)]),
];

const CONFUSIONS: &[(&str, &str, f64)] = &[
    ("eh", "ey", 3.0),
    ("ey", "eh", 2.0),
    ("s", "t", 2.0),
    ("t", "s", 1.0),
    ("d", "t", 2.0),
    ("ih", "eh", 2.0),
    ("er", "ah", 2.0),
    ("ah", "eh", 1.0),
    ("n", "d", 1.0),
    ("f", "s", 1.0),
    ("hh", "f", 1.0),
];

const CLOSE: &[(&str, &str)] = &[
    ("eh", "ey"),
    ("s", "t"),
    ("d", "t"),
    ("n", "d"),
    ("f", "hh"),
    ("er", "ah"),
];

impl Default for SynthConfig {
    fn default() -> Self {
        let inventory = ["ih", "ax", "n", "ah", "f", "s", "t", "eh", "ey", "d", "er", "hh", "pause", "eos", "blank"]
            .map(String::from)
            .to_vec();
        let lexicon = WORDS
            .iter()
            .map(|(word, vs)| WordSpec {
                word: word.to_string(),
                variants: vs.iter().map(|&(pron, prob)| VariantSpec { pron: pron.into(), prob }).collect(),
            })
            .collect();
        Self {
            inventory,
            lexicon,
            p_link: 0.2,
            errors: ErrorSpec {
                word_error_rate: 0.275,
                substitution_share: 0.7,
                deletion_share: 0.15,
                insertion_share: 0.15,
                confusions: CONFUSIONS
                    .iter()
                    .map(|&(from, to, weight)| ConfusionSpec { from: from.into(), to: to.into(), weight })
                    .collect(),
            },
            emission: EmissionSpec {
                mean_duration: 3.0,
                alpha: 0.65,
                alpha_concentration: Some(4.0),
                spread: 0.6,
                close_pairs: CLOSE.iter().map(|&(a, b)| [a.to_string(), b.to_string()]).collect(),
                blank_rate: 0.3,
                blank_mass: 0.9,
                frame_jitter: 0.3,
                frame_step_ms: 10.0,
            },
            sizes: CorpusSizes { train_l1: 200, test_l2: 50 },
            words_per_utterance: [8, 14],
            seed: 20240501,
        }
    }
}
