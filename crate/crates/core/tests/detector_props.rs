use mispron::decoder::Hypothesis;
use mispron::detector::{detect, DetectorConfig, DetectorMode, ThresholdRule};
use mispron::lexicon::CanonicalTranscript;
use mispron::phoneme::{PhonemeId, PhonemeInventory, PhonemeSeq};
use mispron::pm::EditTransducer;
use proptest::prelude::*;

fn inv() -> PhonemeInventory {
    PhonemeInventory::new(&["a", "b", "c", "d", "pause", "eos", "blank"]).unwrap()
}

const SIZE: usize = 6;

fn normalized(v: Vec<f64>) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

fn transcript() -> impl Strategy<Value = CanonicalTranscript> {
    prop::collection::vec(prop::collection::vec(0u32..4, 1..4), 1..5).prop_map(|words| {
        let inv = inv();
        CanonicalTranscript::from_words(
            words
                .into_iter()
                .enumerate()
                .map(|(k, w)| (format!("w{k}"), PhonemeSeq::new(w.into_iter().map(PhonemeId).collect(), &inv).unwrap()))
                .collect(),
        )
    })
}

fn hypothesis() -> impl Strategy<Value = Hypothesis<f64>> {
    prop::collection::vec((0u32..SIZE as u32, prop::collection::vec(0.0f64..1.0, SIZE), 0.0f64..1.0), 0..10).prop_map(
        |cells| {
            let inv = inv();
            let seq = PhonemeSeq::new(cells.iter().map(|c| PhonemeId(c.0)).collect(), &inv).unwrap();
            let mut h = Hypothesis::certain(seq, SIZE);
            h.pos_posteriors = cells
                .iter()
                .map(|(p, row, peak)| {
                    let mut row = row.clone();
                    row[*p as usize] += 3.0 * peak;
                    normalized(row.into_iter().map(|v| v + 1e-6).collect())
                })
                .collect();
            h
        },
    )
}

fn transducer() -> impl Strategy<Value = EditTransducer<f64>> {
    (
        prop::collection::vec(prop::collection::vec(0.001f64..1.0, SIZE + 1), SIZE),
        prop::collection::vec(0.001f64..1.0, SIZE),
        0.0f64..0.5,
    )
        .prop_map(|(subs, ins, rate)| {
            let subs = subs
                .into_iter()
                .enumerate()
                .map(|(c, mut row)| {
                    row[c] += 4.0;
                    normalized(row)
                })
                .collect();
            EditTransducer::from_parts(&inv(), subs, normalized(ins), rate, 0.1).unwrap()
        })
}

fn case() -> impl Strategy<Value = (CanonicalTranscript, Vec<Hypothesis<f64>>, EditTransducer<f64>)> {
    (transcript(), prop::collection::vec(hypothesis(), 1..5), transducer())
}

fn flags(
    t: &CanonicalTranscript,
    hyps: &[Hypothesis<f64>],
    pm: &EditTransducer<f64>,
    mode: DetectorMode,
    threshold: f64,
    n: usize,
) -> Vec<bool> {
    detect(hyps, t, &inv(), Some(pm), &DetectorConfig::new(mode, threshold, n))
        .unwrap()
        .iter()
        .map(|d| d.flagged)
        .collect()
}

fn subset(a: &[bool], b: &[bool]) -> bool {
    a.iter().zip(b).all(|(&x, &y)| !x || y)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn flag_sets_nest_in_threshold((t, hyps, pm) in case(), lo in 0.0f64..=1.0, hi in 0.0f64..=1.0) {
        let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        for mode in DetectorMode::ALL {
            let n = hyps.len();
            prop_assert!(subset(&flags(&t, &hyps, &pm, mode, hi, n), &flags(&t, &hyps, &pm, mode, lo, n)));
        }
    }

    #[test]
    fn flag_sets_nest_in_n((t, hyps, pm) in case(), theta in 0.0f64..=1.0) {
        for mode in DetectorMode::ALL {
            for n in 1..hyps.len() {
                prop_assert!(subset(&flags(&t, &hyps, &pm, mode, theta, n + 1), &flags(&t, &hyps, &pm, mode, theta, n)));
            }
        }
    }

    #[test]
    fn error_probs_are_probabilities((t, hyps, pm) in case(), theta in 0.0f64..=1.0) {
        for mode in DetectorMode::ALL {
            let decisions = detect(&hyps, &t, &inv(), Some(&pm), &DetectorConfig::new(mode, theta, hyps.len())).unwrap();
            prop_assert_eq!(decisions.len(), t.word_count());
            for d in &decisions {
                prop_assert!(d.per_hypothesis_probs.iter().all(|p| (0.0..=1.0).contains(p)));
                prop_assert!((0.0..=1.0).contains(&d.error_prob));
            }
        }
    }

    #[test]
    fn perfect_hypotheses_give_zero((t, _hyps, pm) in case(), extra in prop::collection::vec(hypothesis(), 0..3)) {
        let mut hyps = vec![Hypothesis::certain(t.flattened().clone(), SIZE)];
        for mut h in extra {
            h.seq = t.flattened().clone();
            h.pos_posteriors.resize(h.seq.len(), normalized(vec![1.0; SIZE]));
            hyps.push(h);
        }
        for mode in DetectorMode::ALL {
            let decisions = detect(&hyps, &t, &inv(), Some(&pm), &DetectorConfig::new(mode, 0.0, hyps.len())).unwrap();
            prop_assert!(decisions.iter().all(|d| d.error_prob == 0.0 && !d.flagged));
        }
    }

    #[test]
    fn certain_inputs_reduce_every_mode_to_nolik((t, hyps, _pm) in case(), theta in 0.0f64..=1.0) {
        let inv = inv();
        let certain: Vec<Hypothesis<f64>> = hyps.iter().map(Hypothesis::with_certain_posteriors).collect();
        let identity = EditTransducer::identity(&inv);
        let n = hyps.len();
        let nolik = detect(&hyps, &t, &inv, None, &DetectorConfig::new(DetectorMode::NoLik, theta, n)).unwrap();
        let lik = detect(&certain, &t, &inv, None, &DetectorConfig::new(DetectorMode::Lik, theta, n)).unwrap();
        let pm = detect(&certain, &t, &inv, Some(&identity), &DetectorConfig::new(DetectorMode::Pm, theta, n)).unwrap();
        let strip = |v: &[mispron::detector::WordDecision<f64>]| v.iter().map(|d| (d.flagged, d.per_hypothesis_probs.clone())).collect::<Vec<_>>();
        prop_assert_eq!(strip(&lik), strip(&nolik));
        prop_assert_eq!(strip(&pm), strip(&nolik));
    }

    #[test]
    fn below_rule_complements_at_least_on_single_hypothesis((t, hyps, pm) in case(), theta in 0.001f64..=1.0) {
        let inv = inv();
        let mut at = DetectorConfig::new(DetectorMode::Pm, theta, 1);
        let a = detect(&hyps, &t, &inv, Some(&pm), &at).unwrap();
        at.rule = ThresholdRule::Below;
        let b = detect(&hyps, &t, &inv, Some(&pm), &at).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(x.flagged, !y.flagged);
        }
    }
}
