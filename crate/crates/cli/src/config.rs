use std::path::{Path, PathBuf};

use serde::Deserialize;

/// Optional run configuration. Any flag given on the command line wins over
/// the value here; relative paths resolve against the file's directory.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub manifest: Option<PathBuf>,
    pub hyps: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    pub pm: Option<PathBuf>,
    pub generator: Option<PathBuf>,
    pub mode: Option<String>,
    pub modes: Option<Vec<String>>,
    pub nbest: Option<usize>,
    pub beam_width: Option<usize>,
    pub min_phoneme_prob: Option<f64>,
    pub threshold: Option<f64>,
    pub grid: Option<String>,
    pub smoothing: Option<f64>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub invert_threshold: Option<bool>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let mut cfg: RunConfig = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut cfg.manifest,
            &mut cfg.hyps,
            &mut cfg.lexicon,
            &mut cfg.annotations,
            &mut cfg.pm,
            &mut cfg.generator,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

/// Flag value if present, else the config value.
pub fn pick<T>(flag: Option<T>, config: &Option<T>) -> Option<T>
where
    T: Clone,
{
    flag.or_else(|| config.clone())
}
