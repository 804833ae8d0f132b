use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mispron::align::AlignParams;
use mispron::corpus::load_manifest;
use mispron::detector::{DetectorConfig, DetectorMode};
use mispron::lexicon::Lexicon;
use mispron::pipeline::{corpus_inventory, detect_corpus, read_nbest, train_pm_from_corpus, DecisionsFile};
use mispron::pm::EditTransducer;
use mispron::synth::{load_truth, SynthConfig};

fn mispron(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mispron")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = mispron(args);
    assert!(out.status.success(), "{args:?} failed:\n{}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Workspace {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Workspace {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        Self { _dir: dir, root }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn manifest(&self) -> PathBuf {
        self.path("corpus/manifest.json")
    }

    fn synth(&self, l1: usize, l2: usize) {
        ok(&["synth", "--out", s(&self.path("corpus")), "--train-l1", &l1.to_string(), "--test-l2", &l2.to_string()]);
    }

    fn decode(&self) {
        ok(&["decode", "--manifest", s(&self.manifest()), "--out", s(&self.path("hyps"))]);
    }

    fn train(&self) {
        ok(&["train-pm", "--manifest", s(&self.manifest()), "--hyps", s(&self.path("hyps")), "--out", s(&self.path("pm.json"))]);
    }
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn full_pipeline_writes_every_artifact() {
    let ws = Workspace::new();
    ws.synth(30, 15);
    ws.decode();
    ws.train();
    let m = ws.manifest();
    for mode in ["NOLIK", "LIK", "PM"] {
        let out = ws.path(&format!("{mode}.json"));
        ok(&[
            "detect", "--manifest", s(&m), "--hyps", s(&ws.path("hyps")), "--pm", s(&ws.path("pm.json")),
            "--mode", mode, "--threshold", "0.5", "--out", s(&out),
        ]);
        let file = DecisionsFile::<f64>::load(&out).unwrap();
        assert_eq!(file.config.mode.name(), mode);
        assert_eq!(file.config.n, 4);
        assert_eq!(file.config.threshold, 0.5);
        assert_eq!(file.utterances.len(), 45);
        assert_eq!(file.config.pm.is_some(), mode == "PM");

        let summary = ok(&["evaluate", "--manifest", s(&m), "--decisions", s(&out)]);
        let json: serde_json::Value = serde_json::from_slice(&summary.stdout).unwrap();
        assert_eq!(json["mode"], mode);
        for key in ["precision", "precision_ci", "recall", "recall_ci", "counts"] {
            assert!(json.get(key).is_some(), "{key}");
        }
    }

    ok(&[
        "sweep", "--manifest", s(&m), "--hyps", s(&ws.path("hyps")), "--pm", s(&ws.path("pm.json")),
        "--grid", "0:1:0.05", "--out", s(&ws.path("sweep")),
    ]);
    for mode in ["NOLIK", "LIK", "PM"] {
        let csv = std::fs::read_to_string(ws.path(&format!("sweep/sweep_{mode}.csv"))).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("threshold,precision,p_lo,p_hi,recall,r_lo,r_hi"));
        assert_eq!(lines.count(), 21);
    }
    let header: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(ws.path("sweep/sweep.json")).unwrap()).unwrap();
    assert_eq!(header["grid"], "0:1:0.05");
    assert_eq!(header["curves"].as_array().unwrap().len(), 3);
}

#[test]
fn sweep_over_stored_decisions_matches_detector_sweep() {
    let ws = Workspace::new();
    ws.synth(20, 10);
    ws.decode();
    let m = ws.manifest();
    let hyps = ws.path("hyps");
    ok(&["detect", "--manifest", s(&m), "--hyps", s(&hyps), "--mode", "LIK", "--threshold", "0", "--out", s(&ws.path("lik.json"))]);
    ok(&["sweep", "--manifest", s(&m), "--decisions", s(&ws.path("lik.json")), "--out", s(&ws.path("a"))]);
    ok(&["sweep", "--manifest", s(&m), "--hyps", s(&hyps), "--mode", "LIK", "--out", s(&ws.path("b"))]);
    assert_eq!(
        std::fs::read(ws.path("a/sweep_LIK.csv")).unwrap(),
        std::fs::read(ws.path("b/sweep_LIK.csv")).unwrap()
    );
}

#[test]
fn noiseless_corpus_decodes_to_ground_truth() {
    let ws = Workspace::new();
    let mut cfg = SynthConfig::default();
    cfg.sizes.train_l1 = 10;
    cfg.sizes.test_l2 = 10;
    cfg.emission.alpha = 1.0;
    cfg.emission.alpha_concentration = None;
    cfg.emission.spread = 0.0;
    cfg.emission.blank_rate = 0.0;
    cfg.emission.blank_mass = 1.0;
    std::fs::write(ws.path("gen.json"), cfg.to_json()).unwrap();
    ok(&["synth", "--generator", s(&ws.path("gen.json")), "--out", s(&ws.path("corpus"))]);
    ws.decode();

    let manifest = load_manifest(&ws.manifest()).unwrap();
    let inv = corpus_inventory(&manifest).unwrap();
    let nbest = read_nbest::<f64>(&ws.path("hyps"), &manifest, &inv).unwrap();
    let truth = load_truth(&ws.path("corpus/truth.json")).unwrap();
    assert_eq!(truth.len(), 20);
    for t in truth {
        assert_eq!(inv.format_seq(&nbest[&t.id][0].seq), t.realized, "{}", t.id);
    }
}

#[test]
fn train_pm_uses_l1_only_and_matches_library() {
    let ws = Workspace::new();
    ws.synth(25, 25);
    ws.decode();
    ws.train();
    let manifest = load_manifest(&ws.manifest()).unwrap();
    let inv = corpus_inventory(&manifest).unwrap();
    let lex = Lexicon::read(&ws.path("corpus/lexicon.txt"), &inv).unwrap();
    let nbest = read_nbest::<f64>(&ws.path("hyps"), &manifest, &inv).unwrap();
    let expected = train_pm_from_corpus(&manifest, &nbest, &lex, &inv, 0.1, &AlignParams::default()).unwrap();
    let cli = EditTransducer::<f64>::load(&ws.path("pm.json"), &inv).unwrap();
    assert_eq!(cli, expected);

    let mut l2_only = manifest.clone();
    l2_only.utterances.retain(|u| u.cohort == mispron::corpus::Cohort::L2);
    assert!(train_pm_from_corpus(&l2_only, &nbest, &lex, &inv, 0.1, &AlignParams::default()).is_err());

    let pm_decisions = ws.path("pm.json.decisions");
    ok(&[
        "detect", "--manifest", s(&ws.manifest()), "--hyps", s(&ws.path("hyps")), "--pm", s(&ws.path("pm.json")),
        "--mode", "PM", "--threshold", "0.3", "--out", s(&pm_decisions),
    ]);
    let run = detect_corpus(&manifest, &nbest, &lex, &inv, Some(&expected), &DetectorConfig::new(DetectorMode::Pm, 0.3, 4))
        .unwrap();
    assert_eq!(DecisionsFile::<f64>::load(&pm_decisions).unwrap().utterances, run.decisions);
}

#[test]
fn runs_are_reproducible() {
    let ws = Workspace::new();
    ws.synth(8, 4);
    ok(&["synth", "--out", s(&ws.path("again")), "--train-l1", "8", "--test-l2", "4"]);
    assert_eq!(read_dir_sorted(&ws.path("corpus/pgram")), read_dir_sorted(&ws.path("again/pgram")));
    ws.decode();
    ok(&["decode", "--manifest", s(&ws.manifest()), "--out", s(&ws.path("hyps2")), "--workers", "1"]);
    assert_eq!(read_dir_sorted(&ws.path("hyps")), read_dir_sorted(&ws.path("hyps2")));
}

#[test]
fn data_errors_exit_2_and_name_the_utterance() {
    let ws = Workspace::new();
    ws.synth(4, 2);
    std::fs::remove_file(ws.path("corpus/pgram/l1_0002.pgram")).unwrap();
    let out = mispron(&["decode", "--manifest", s(&ws.manifest()), "--out", s(&ws.path("hyps"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("l1_0002"));

    let ws = Workspace::new();
    ws.synth(4, 2);
    std::fs::write(ws.path("corpus/pgram/l2_0001.pgram"), "PGRAM 1\nbroken\n").unwrap();
    let out = mispron(&["decode", "--manifest", s(&ws.manifest()), "--out", s(&ws.path("hyps"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("l2_0001"));
}

#[test]
fn usage_errors_exit_1() {
    let ws = Workspace::new();
    ws.synth(4, 2);
    ws.decode();
    let m = ws.manifest();
    let hyps = ws.path("hyps");
    let out_file = ws.path("d.json");
    let cases: Vec<Vec<&str>> = vec![
        vec!["detect", "--bogus"],
        vec!["frobnicate"],
        vec!["detect", "--manifest", s(&m), "--hyps", s(&hyps), "--mode", "PM", "--threshold", "0.5", "--out", s(&out_file)],
        vec!["detect", "--manifest", s(&m), "--hyps", s(&hyps), "--mode", "LIK", "--threshold", "1.5", "--out", s(&out_file)],
        vec!["detect", "--manifest", s(&m), "--hyps", s(&hyps), "--mode", "FOO", "--threshold", "0.5", "--out", s(&out_file)],
        vec!["detect", "--hyps", s(&hyps), "--mode", "LIK", "--threshold", "0.5", "--out", s(&out_file)],
        vec!["sweep", "--manifest", s(&m), "--hyps", s(&hyps), "--grid", "1:0:0.1", "--out", s(&out_file)],
        vec!["decode", "--manifest", s(&m), "--nbest", "20", "--beam-width", "4", "--out", s(&hyps)],
    ];
    for args in cases {
        assert_eq!(mispron(&args).status.code(), Some(1), "{args:?}");
    }
    assert!(!out_file.exists());
    assert_eq!(mispron(&["--help"]).status.code(), Some(0));
}

#[test]
fn nolik_needs_no_model_and_large_n_is_clamped_with_warning() {
    let ws = Workspace::new();
    ws.synth(3, 3);
    ok(&["decode", "--manifest", s(&ws.manifest()), "--out", s(&ws.path("hyps")), "--nbest", "2", "--beam-width", "2"]);
    let out = ok(&[
        "detect", "--manifest", s(&ws.manifest()), "--hyps", s(&ws.path("hyps")), "--mode", "NOLIK",
        "--threshold", "0.5", "--nbest", "4", "--out", s(&ws.path("d.json")),
    ]);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("n lowered from 4"), "{stderr}");
    assert_eq!(DecisionsFile::<f64>::load(&ws.path("d.json")).unwrap().config.mode, DetectorMode::NoLik);
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let ws = Workspace::new();
    ws.synth(6, 3);
    ws.decode();
    std::fs::write(
        ws.path("run.json"),
        r#"{"manifest": "corpus/manifest.json", "hyps": "hyps", "mode": "LIK", "threshold": 0.9, "nbest": 2}"#,
    )
    .unwrap();
    let cfg = ws.path("run.json");
    ok(&["detect", "--config", s(&cfg), "--out", s(&ws.path("a.json"))]);
    let a = DecisionsFile::<f64>::load(&ws.path("a.json")).unwrap();
    assert_eq!((a.config.mode, a.config.threshold, a.config.n), (DetectorMode::Lik, 0.9, 2));
    ok(&["detect", "--config", s(&cfg), "--threshold", "0.2", "--mode", "NOLIK", "--out", s(&ws.path("b.json"))]);
    let b = DecisionsFile::<f64>::load(&ws.path("b.json")).unwrap();
    assert_eq!((b.config.mode, b.config.threshold, b.config.n), (DetectorMode::NoLik, 0.2, 2));

    std::fs::write(ws.path("bad.json"), r#"{"thresold": 0.5}"#).unwrap();
    assert_eq!(mispron(&["detect", "--config", s(&ws.path("bad.json")), "--out", "x"]).status.code(), Some(1));
}

#[test]
fn inverted_threshold_is_recorded() {
    let ws = Workspace::new();
    ws.synth(3, 3);
    ws.decode();
    ok(&[
        "detect", "--manifest", s(&ws.manifest()), "--hyps", s(&ws.path("hyps")), "--mode", "LIK",
        "--threshold", "0.5", "--invert-threshold", "--out", s(&ws.path("d.json")),
    ]);
    let file = DecisionsFile::<f64>::load(&ws.path("d.json")).unwrap();
    assert_eq!(file.config.rule, mispron::detector::ThresholdRule::Below);
}

#[test]
fn synth_print_config_round_trips() {
    let out = ok(&["synth", "--print-config", "--seed", "7"]);
    let cfg: SynthConfig = serde_json::from_slice(&out.stdout).unwrap();
    let mut expected = SynthConfig::default();
    expected.seed = 7;
    assert_eq!(cfg, expected);
}
