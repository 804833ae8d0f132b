mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use serde::Serialize;

use mispron::align::AlignParams;
use mispron::corpus::{load_annotations, load_manifest, CorpusManifest};
use mispron::decoder::BeamParams;
use mispron::detector::{DetectorConfig, DetectorMode, ThresholdRule};
use mispron::eval::{curve_to_csv, join_scores, parse_grid, score, sweep, PRPoint, Summary};
use mispron::io_util::write_atomic;
use mispron::lexicon::Lexicon;
use mispron::phoneme::PhonemeInventory;
use mispron::pipeline::{
    corpus_inventory, decode_corpus, detect_corpus, read_nbest, train_pm_from_corpus, with_workers, write_nbest,
    DecisionsFile, DetectHeader, NBestMap,
};
use mispron::pm::EditTransducer;
use mispron::synth::{generate_corpus, SynthConfig};

use config::{pick, RunConfig};

#[derive(Parser)]
#[command(name = "mispron", version, about = "Word-level mispronunciation detection over phoneme posteriorgrams")]
struct Cli {
    /// Run configuration (JSON). Flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for per-utterance stages.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decode every posteriorgram of a corpus into an N-best file.
    Decode(DecodeArgs),
    /// Train the pronunciation model on the L1 utterances.
    TrainPm(TrainArgs),
    /// Flag mispronounced words at one threshold.
    Detect(DetectArgs),
    /// Score a decisions file against annotations.
    Evaluate(EvaluateArgs),
    /// Precision/recall over a threshold grid, one CSV per mode.
    Sweep(SweepArgs),
    /// Generate a seeded synthetic corpus.
    Synth(SynthArgs),
}

#[derive(Args)]
struct CorpusArgs {
    /// Corpus manifest (JSON).
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Lexicon file; defaults to `lexicon.txt` next to the manifest.
    #[arg(long)]
    lexicon: Option<PathBuf>,
}

#[derive(Args)]
struct DecodeArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Hypotheses kept per utterance.
    #[arg(long)]
    nbest: Option<usize>,
    #[arg(long)]
    beam_width: Option<usize>,
    /// Candidate phonemes below this frame probability are not extended.
    #[arg(long)]
    min_phoneme_prob: Option<f64>,
    /// Output directory for `<id>.nbest.json` files.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Directory of N-best files written by `decode`.
    #[arg(long)]
    hyps: Option<PathBuf>,
    /// Add-k smoothing constant.
    #[arg(long)]
    smoothing: Option<f64>,
    /// Output transducer file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DetectOptions {
    /// Directory of N-best files written by `decode`.
    #[arg(long)]
    hyps: Option<PathBuf>,
    /// Pronunciation model file (PM mode only).
    #[arg(long)]
    pm: Option<PathBuf>,
    /// Hypotheses that must agree before a word is flagged.
    #[arg(long)]
    nbest: Option<usize>,
    /// Flag when the error probability falls below the threshold instead.
    #[arg(long)]
    invert_threshold: bool,
}

#[derive(Args)]
struct DetectArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    detect: DetectOptions,
    /// NOLIK, LIK or PM.
    #[arg(long)]
    mode: Option<DetectorMode>,
    #[arg(long)]
    threshold: Option<f64>,
    /// Output decisions file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Decisions file written by `detect`.
    #[arg(long)]
    decisions: PathBuf,
    /// Word-level annotations (JSON).
    #[arg(long)]
    annotations: Option<PathBuf>,
    /// Summary output; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    detect: DetectOptions,
    /// Modes to sweep; all three by default (PM needs `--pm`).
    #[arg(long = "mode", value_delimiter = ',')]
    modes: Vec<DetectorMode>,
    /// Sweep stored decisions files instead of running the detector.
    #[arg(long = "decisions", conflicts_with = "hyps")]
    decisions: Vec<PathBuf>,
    #[arg(long)]
    annotations: Option<PathBuf>,
    /// Threshold grid `lo:hi:step`.
    #[arg(long)]
    grid: Option<String>,
    /// Output directory for `sweep_<MODE>.csv` and `sweep.json`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    /// Generator configuration (JSON); built-in defaults when absent.
    #[arg(long)]
    generator: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    train_l1: Option<usize>,
    #[arg(long)]
    test_l2: Option<usize>,
    /// Print the generator configuration in effect and exit.
    #[arg(long)]
    print_config: bool,
    #[arg(long, required_unless_present = "print_config")]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Data(String),
}

type Outcome = Result<(), Failure>;

fn data<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Data(e.to_string())
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Outcome {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(usage)?,
        None => RunConfig::default(),
    };
    let workers = pick(cli.workers, &cfg.workers);
    match cli.command {
        Command::Decode(a) => decode(a, &cfg, workers),
        Command::TrainPm(a) => train_pm(a, &cfg, workers),
        Command::Detect(a) => detect(a, &cfg, workers),
        Command::Evaluate(a) => evaluate(a, &cfg),
        Command::Sweep(a) => run_sweep(a, &cfg, workers),
        Command::Synth(a) => synth(a, &cfg),
    }
}

struct Corpus {
    manifest: CorpusManifest,
    manifest_path: PathBuf,
    inventory: PhonemeInventory,
}

fn open_corpus(args: &CorpusArgs, cfg: &RunConfig) -> Result<Corpus, Failure> {
    let manifest_path = pick(args.manifest.clone(), &cfg.manifest).ok_or_else(|| usage("--manifest is required"))?;
    let manifest = load_manifest(&manifest_path).map_err(data)?;
    let inventory = corpus_inventory(&manifest).map_err(data)?;
    Ok(Corpus { manifest, manifest_path, inventory })
}

fn open_lexicon(args: &CorpusArgs, cfg: &RunConfig, corpus: &Corpus) -> Result<Lexicon, Failure> {
    let path = pick(args.lexicon.clone(), &cfg.lexicon)
        .unwrap_or_else(|| corpus.manifest_path.parent().unwrap_or(Path::new("")).join("lexicon.txt"));
    Lexicon::read(&path, &corpus.inventory).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn open_hyps(flag: &Option<PathBuf>, cfg: &RunConfig, corpus: &Corpus) -> Result<NBestMap<f64>, Failure> {
    let dir = pick(flag.clone(), &cfg.hyps).ok_or_else(|| usage("--hyps is required"))?;
    read_nbest(&dir, &corpus.manifest, &corpus.inventory).map_err(data)
}

fn open_pm(flag: &Option<PathBuf>, cfg: &RunConfig, corpus: &Corpus) -> Result<Option<(EditTransducer<f64>, PathBuf)>, Failure> {
    match pick(flag.clone(), &cfg.pm) {
        Some(path) => {
            let pm = EditTransducer::load(&path, &corpus.inventory)
                .map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
            Ok(Some((pm, path)))
        }
        None => Ok(None),
    }
}

fn threshold_rule(flag: bool, cfg: &RunConfig) -> ThresholdRule {
    if flag || cfg.invert_threshold == Some(true) {
        ThresholdRule::Below
    } else {
        ThresholdRule::AtLeast
    }
}

fn parse_mode(s: &str) -> Result<DetectorMode, Failure> {
    s.parse().map_err(usage)
}

fn write_text(path: &Path, text: &str) -> Outcome {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Failure::Data(format!("{}: {e}", dir.display())))?;
    }
    write_atomic(path, text.as_bytes()).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Outcome {
    write_text(path, &(serde_json::to_string_pretty(value).expect("output serializes") + "\n"))
}

fn pooled<T: Send>(workers: Option<usize>, f: impl FnOnce() -> Result<T, Failure> + Send) -> Result<T, Failure> {
    with_workers(workers, f).map_err(data)?
}

fn decode(a: DecodeArgs, cfg: &RunConfig, workers: Option<usize>) -> Outcome {
    let corpus = open_corpus(&a.corpus, cfg)?;
    let defaults = BeamParams::default();
    let params = BeamParams {
        beam_width: pick(a.beam_width, &cfg.beam_width).unwrap_or(defaults.beam_width),
        n_best: pick(a.nbest, &cfg.nbest).unwrap_or(defaults.n_best),
        min_phoneme_prob: pick(a.min_phoneme_prob, &cfg.min_phoneme_prob).unwrap_or(defaults.min_phoneme_prob),
    };
    params.validate().map_err(|e| usage(e.to_string()))?;
    let nbest = pooled(workers, || decode_corpus::<f64>(&corpus.manifest, &corpus.inventory, &params).map_err(data))?;
    write_nbest(&a.out, &nbest, &corpus.inventory, &params).map_err(data)?;
    info!("decoded {} utterances into {}", nbest.len(), a.out.display());
    Ok(())
}

fn train_pm(a: TrainArgs, cfg: &RunConfig, workers: Option<usize>) -> Outcome {
    let corpus = open_corpus(&a.corpus, cfg)?;
    let lexicon = open_lexicon(&a.corpus, cfg, &corpus)?;
    let k = pick(a.smoothing, &cfg.smoothing).unwrap_or(0.1);
    if !(k.is_finite() && k >= 0.0) {
        return Err(usage("--smoothing must be a non-negative number"));
    }
    let nbest = open_hyps(&a.hyps, cfg, &corpus)?;
    let pm = pooled(workers, || {
        train_pm_from_corpus(&corpus.manifest, &nbest, &lexicon, &corpus.inventory, k, &AlignParams::default())
            .map_err(data)
    })?;
    pm.save(&a.out).map_err(|e| Failure::Data(format!("{}: {e}", a.out.display())))?;
    info!(
        "trained on {} L1 utterances (k={k}, ins_rate={:.4}) -> {}",
        corpus.manifest.cohort(mispron::corpus::Cohort::L1).count(),
        pm.ins_rate(),
        a.out.display()
    );
    Ok(())
}

/// Runs the detector over the corpus, warning about clamped `n`.
fn run_detector(
    corpus: &Corpus,
    nbest: &NBestMap<f64>,
    lexicon: &Lexicon,
    pm: Option<&EditTransducer<f64>>,
    config: &DetectorConfig<f64>,
    workers: Option<usize>,
) -> Result<Vec<mispron::detector::UtteranceDecisions<f64>>, Failure> {
    if config.mode == DetectorMode::Pm && pm.is_none() {
        return Err(usage("PM mode needs a pronunciation model (--pm)"));
    }
    let run = pooled(workers, || {
        detect_corpus(&corpus.manifest, nbest, lexicon, &corpus.inventory, pm, config).map_err(data)
    })?;
    for (id, available) in &run.clamped {
        warn!("utterance `{id}`: only {available} hypotheses, n lowered from {}", config.n);
    }
    Ok(run.decisions)
}

fn detector_n(flag: Option<usize>, cfg: &RunConfig) -> Result<usize, Failure> {
    let n = pick(flag, &cfg.nbest).unwrap_or(4);
    if n == 0 {
        return Err(usage("--nbest must be at least 1"));
    }
    Ok(n)
}

fn detect(a: DetectArgs, cfg: &RunConfig, workers: Option<usize>) -> Outcome {
    let mode = match a.mode {
        Some(m) => m,
        None => parse_mode(cfg.mode.as_deref().ok_or_else(|| usage("--mode is required"))?)?,
    };
    let threshold = pick(a.threshold, &cfg.threshold).ok_or_else(|| usage("--threshold is required"))?;
    if !(0.0..=1.0).contains(&threshold) {
        return Err(usage("--threshold must lie in [0, 1]"));
    }
    let n = detector_n(a.detect.nbest, cfg)?;
    let corpus = open_corpus(&a.corpus, cfg)?;
    let lexicon = open_lexicon(&a.corpus, cfg, &corpus)?;
    let pm = if mode == DetectorMode::Pm { open_pm(&a.detect.pm, cfg, &corpus)? } else { None };
    let nbest = open_hyps(&a.detect.hyps, cfg, &corpus)?;
    let mut config = DetectorConfig::new(mode, threshold, n);
    config.rule = threshold_rule(a.detect.invert_threshold, cfg);
    let decisions = run_detector(&corpus, &nbest, &lexicon, pm.as_ref().map(|p| &p.0), &config, workers)?;
    let flagged: usize = decisions.iter().map(|u| u.words.iter().filter(|w| w.flagged).count()).sum();
    let file = DecisionsFile {
        config: DetectHeader {
            mode,
            threshold,
            n,
            rule: config.rule,
            pm: pm.map(|p| p.1.display().to_string()),
        },
        utterances: decisions,
    };
    file.save(&a.out).map_err(data)?;
    info!("{mode}: flagged {flagged} words in {} utterances -> {}", file.utterances.len(), a.out.display());
    Ok(())
}

fn annotations_path(flag: &Option<PathBuf>, cfg: &RunConfig, corpus: &Corpus) -> PathBuf {
    pick(flag.clone(), &cfg.annotations)
        .unwrap_or_else(|| corpus.manifest_path.parent().unwrap_or(Path::new("")).join("annotations.json"))
}

fn evaluate(a: EvaluateArgs, cfg: &RunConfig) -> Outcome {
    let manifest_path = pick(a.manifest.clone(), &cfg.manifest).ok_or_else(|| usage("--manifest is required"))?;
    let manifest = load_manifest(&manifest_path).map_err(data)?;
    let ann_path = pick(a.annotations.clone(), &cfg.annotations)
        .unwrap_or_else(|| manifest_path.parent().unwrap_or(Path::new("")).join("annotations.json"));
    let annotations = load_annotations(&ann_path, &manifest).map_err(data)?;
    let file = DecisionsFile::<f64>::load(&a.decisions).map_err(data)?;
    let counts = score(&file.utterances, &annotations).map_err(data)?;
    let summary = Summary::new(file.config.mode.name(), file.config.threshold, counts).map_err(data)?;
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
    match &a.out {
        Some(path) => write_text(path, &text)?,
        None => print!("{text}"),
    }
    info!(
        "{}: precision {} recall {}",
        summary.mode,
        summary.precision.map_or("n/a".into(), |p| format!("{p:.4}")),
        summary.recall.map_or("n/a".into(), |r| format!("{r:.4}"))
    );
    Ok(())
}

#[derive(Serialize)]
struct SweepHeader {
    grid: String,
    rule: ThresholdRule,
    n: Option<usize>,
    pm: Option<String>,
    curves: Vec<SweepCurve>,
}

#[derive(Serialize)]
struct SweepCurve {
    mode: DetectorMode,
    file: String,
    points: usize,
}

fn run_sweep(a: SweepArgs, cfg: &RunConfig, workers: Option<usize>) -> Outcome {
    let grid_spec = pick(a.grid.clone(), &cfg.grid).unwrap_or_else(|| "0:1:0.01".into());
    let grid = parse_grid(&grid_spec).map_err(|e| usage(e.to_string()))?;
    let rule = threshold_rule(a.detect.invert_threshold, cfg);
    let corpus = open_corpus(&a.corpus, cfg)?;
    let annotations =
        load_annotations(&annotations_path(&a.annotations, cfg, &corpus), &corpus.manifest).map_err(data)?;

    let mut runs: Vec<(DetectorMode, Vec<mispron::detector::UtteranceDecisions<f64>>)> = Vec::new();
    let mut n_used = None;
    let mut pm_used = None;
    if !a.decisions.is_empty() {
        for path in &a.decisions {
            let file = DecisionsFile::<f64>::load(path).map_err(data)?;
            runs.push((file.config.mode, file.utterances));
        }
    } else {
        let modes = if !a.modes.is_empty() {
            a.modes.clone()
        } else if let Some(list) = &cfg.modes {
            list.iter().map(|m| parse_mode(m)).collect::<Result<_, _>>()?
        } else {
            DetectorMode::ALL.to_vec()
        };
        let n = detector_n(a.detect.nbest, cfg)?;
        let lexicon = open_lexicon(&a.corpus, cfg, &corpus)?;
        let pm = if modes.contains(&DetectorMode::Pm) { open_pm(&a.detect.pm, cfg, &corpus)? } else { None };
        let nbest = open_hyps(&a.detect.hyps, cfg, &corpus)?;
        for mode in modes {
            let config = DetectorConfig::new(mode, 0.0, n);
            let decisions = run_detector(&corpus, &nbest, &lexicon, pm.as_ref().map(|p| &p.0), &config, workers)?;
            runs.push((mode, decisions));
        }
        n_used = Some(n);
        pm_used = pm.map(|p| p.1.display().to_string());
    }

    let mut curves = Vec::new();
    for (mode, decisions) in runs {
        let words = join_scores(&decisions, &annotations).map_err(data)?;
        let points: Vec<PRPoint<f64>> = sweep(&words, &grid, rule).map_err(data)?;
        let file = format!("sweep_{}.csv", mode.name());
        write_text(&a.out.join(&file), &curve_to_csv(&points))?;
        info!("{mode}: {} points -> {}", points.len(), a.out.join(&file).display());
        curves.push(SweepCurve { mode, file, points: points.len() });
    }
    write_json(&a.out.join("sweep.json"), &SweepHeader { grid: grid_spec, rule, n: n_used, pm: pm_used, curves })
}

fn synth(a: SynthArgs, cfg: &RunConfig) -> Outcome {
    let mut generator = match pick(a.generator.clone(), &cfg.generator) {
        Some(path) => SynthConfig::load(&path).map_err(|e| usage(e.to_string()))?,
        None => SynthConfig::default(),
    };
    if let Some(seed) = pick(a.seed, &cfg.seed) {
        generator.seed = seed;
    }
    if let Some(n) = a.train_l1 {
        generator.sizes.train_l1 = n;
    }
    if let Some(n) = a.test_l2 {
        generator.sizes.test_l2 = n;
    }
    if a.print_config {
        println!("{}", generator.to_json());
        return Ok(());
    }
    generator.build().map_err(|e| usage(e.to_string()))?;
    let out = a.out.expect("clap enforces --out");
    let corpus = generate_corpus(&generator, &out).map_err(data)?;
    info!(
        "wrote {} utterances ({} annotated) to {}",
        corpus.manifest.utterances.len(),
        corpus.annotations.len(),
        out.display()
    );
    Ok(())
}
