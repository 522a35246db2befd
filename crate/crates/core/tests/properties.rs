use std::collections::HashMap;

use abxkit::abx::{model_accuracy, score_trial, DiscriminabilityRecord};
use abxkit::dataset::{
    binarize, make_items, mine_stimulus_sets, AlignmentEntry, MiningFilter,
};
use abxkit::feature_io::{
    read_trial_manifest, write_trial_manifest, Language, Order, Position, Trial,
};
use abxkit::linking::{fit_probit, log_likelihood};
use abxkit::metrics::{dtw_distance, gamma_cos, DivergenceKind};
use abxkit::mfcc::{baseline_features, MfccConfig, Waveform};
use abxkit::{read_feature_file, FeatureSequence, Mode};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn frames(max_len: usize, dim: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-1e3..1e3f64, dim), 1..=max_len)
}

fn prob_frames(max_len: usize, dim: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.01..1.0f64, dim), 1..=max_len).prop_map(|fs| {
        fs.into_iter()
            .map(|f| {
                let s: f64 = f.iter().sum();
                f.into_iter().map(|v| v / s).collect()
            })
            .collect()
    })
}

fn both_kinds() -> impl Strategy<Value = (DivergenceKind, Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    prop_oneof![
        (frames(6, 3), frames(6, 3)).prop_map(|(a, b)| (DivergenceKind::AngularCosine, a, b)),
        (prob_frames(6, 3), prob_frames(6, 3)).prop_map(|(a, b)| (DivergenceKind::SymmetrizedKl, a, b)),
    ]
}

fn mode_for(kind: DivergenceKind) -> Mode {
    match kind {
        DivergenceKind::SymmetrizedKl => Mode::Probability,
        DivergenceKind::AngularCosine => Mode::General,
    }
}

fn nonzero(fs: &[Vec<f64>]) -> bool {
    fs.iter().all(|f| f.iter().any(|&v| v != 0.0))
}

proptest! {
    #[test]
    fn feature_file_round_trip(fs in frames(8, 4), id in "[a-z][a-z0-9_-]{0,8}") {
        let seq = FeatureSequence::new(id, fs, Mode::General).unwrap();
        let back = read_feature_file(seq.to_feature_string().as_bytes(), Mode::General).unwrap();
        prop_assert_eq!(back.stimulus_id(), seq.stimulus_id());
        prop_assert_eq!(back.len(), seq.len());
        for (a, b) in seq.frames().zip(back.frames()) {
            for (x, y) in a.iter().zip(b) {
                prop_assert!((x - y).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn probability_round_trip(fs in prob_frames(8, 5)) {
        let seq = FeatureSequence::new("p", fs, Mode::Probability).unwrap();
        let back = read_feature_file(seq.to_feature_string().as_bytes(), Mode::Probability).unwrap();
        for (a, b) in seq.frames().zip(back.frames()) {
            for (x, y) in a.iter().zip(b) {
                prop_assert!((x - y).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn dtw_symmetric_and_nonnegative((kind, a, b) in both_kinds()) {
        prop_assume!(nonzero(&a) && nonzero(&b));
        let c = FeatureSequence::new("c", a, mode_for(kind)).unwrap();
        let d = FeatureSequence::new("d", b, mode_for(kind)).unwrap();
        let cd = dtw_distance(&c, &d, kind).unwrap();
        let dc = dtw_distance(&d, &c, kind).unwrap();
        prop_assert!(cd >= 0.0);
        prop_assert!((cd - dc).abs() <= 1e-12);
        prop_assert_eq!(dtw_distance(&c, &c, kind).unwrap(), 0.0);
    }

    #[test]
    fn cosine_scale_invariance(
        x in prop::collection::vec(-10.0..10.0f64, 4),
        y in prop::collection::vec(-10.0..10.0f64, 4),
        a in 1e-3..1e3f64,
        b in 1e-3..1e3f64,
    ) {
        prop_assume!(nonzero(&[x.clone(), y.clone()]));
        let xs: Vec<f64> = x.iter().map(|v| v * a).collect();
        let ys: Vec<f64> = y.iter().map(|v| v * b).collect();
        let g = gamma_cos(&x, &y).unwrap();
        prop_assert!((gamma_cos(&xs, &ys).unwrap() - g).abs() <= 1e-12);
        prop_assert!((gamma_cos(&y, &x).unwrap() - g).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&g));
    }

    #[test]
    fn correctness_survives_positive_scaling(
        t in frames(5, 3), o in frames(5, 3), p in frames(5, 3), scale in 1e-2..1e2f64,
    ) {
        prop_assume!(nonzero(&t) && nonzero(&o) && nonzero(&p));
        let trial = trial("t1", "T", "O", "P", Order::AbA, "a-i", Language::Native);
        let features = |s: f64| -> HashMap<String, FeatureSequence> {
            [("T", &t), ("O", &o), ("P", &p)]
                .into_iter()
                .map(|(id, fs)| {
                    let seq = FeatureSequence::new(id, fs.clone(), Mode::General).unwrap().scaled(s);
                    (id.to_string(), seq)
                })
                .collect()
        };
        let plain = score_trial(&trial, &features(1.0), DivergenceKind::AngularCosine).unwrap();
        let scaled = score_trial(&trial, &features(scale), DivergenceKind::AngularCosine).unwrap();
        prop_assume!(plain.delta.abs() > 1e-9);
        prop_assert_eq!(plain.is_correct(), scaled.is_correct());
    }

    #[test]
    fn delta_ignores_common_offset(t in 0.0..10.0f64, o in 0.0..10.0f64, c in 1e-6..10.0f64) {
        let r = DiscriminabilityRecord::new("t", t, o);
        let shifted = DiscriminabilityRecord::new("t", t + c, o + c);
        prop_assert!((r.delta - shifted.delta).abs() <= 1e-12 * (1.0 + t.abs() + o.abs() + c));
        prop_assert_eq!(r.delta, o - t);
    }

    #[test]
    fn aggregation_is_permutation_invariant(
        deltas in prop::collection::vec(-1.0..1.0f64, 12),
        seed in any::<u64>(),
    ) {
        let trials: Vec<Trial> = (0..12)
            .map(|i| {
                let contrast = ["a-i", "e-u", "o-y"][i % 3];
                let language = if i % 2 == 0 { Language::Native } else { Language::Other };
                trial(&format!("t{i}"), &format!("T{i}"), &format!("O{i}"), &format!("P{i}"), Order::ALL[i % 4], contrast, language)
            })
            .collect();
        let mut records: Vec<DiscriminabilityRecord> = deltas
            .iter()
            .enumerate()
            .map(|(i, &d)| DiscriminabilityRecord::new(format!("t{i}"), 1.0, 1.0 + d))
            .collect();
        let before = model_accuracy(&records, &trials).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        use rand::seq::SliceRandom;
        records.shuffle(&mut rng);
        let mut shuffled_trials = trials.clone();
        shuffled_trials.shuffle(&mut rng);
        let after = model_accuracy(&records, &shuffled_trials).unwrap();
        prop_assert_eq!(before, after);
    }

    #[test]
    fn binarization_is_monotone(a in 1u8..=3, b in 4u8..=6, bad in 7u8..) {
        prop_assert_eq!(binarize(a), Some(Position::First));
        prop_assert_eq!(binarize(b), Some(Position::Second));
        prop_assert_eq!(binarize(bad), None);
        prop_assert_eq!(binarize(0), None);
    }

    #[test]
    fn manifest_rows_satisfy_trial_invariants(rows in prop::collection::vec(manifest_row(), 1..12)) {
        let mut text = String::from(
            "trial_id,target_id,other_id,probe_id,order,contrast,context,language,ref_speaker,probe_speaker\n",
        );
        for r in &rows {
            text.push_str(&r.join(","));
            text.push('\n');
        }
        if let Ok(trials) = read_trial_manifest(text.as_bytes()) {
            let mut ids = std::collections::HashSet::new();
            for t in &trials {
                prop_assert!(!t.trial_id.is_empty());
                prop_assert!(t.target_id != t.other_id);
                prop_assert!(t.probe_id != t.target_id && t.probe_id != t.other_id);
                prop_assert!(t.ref_speaker != t.probe_speaker);
                prop_assert!(ids.insert(t.trial_id.clone()));
            }
            prop_assert_eq!(trials.len(), rows.len());
        }
    }

    #[test]
    fn mined_sets_are_valid_and_round_trip(seed in any::<u64>()) {
        let entries = random_alignment(seed);
        let sets = mine_stimulus_sets(&entries, &MiningFilter::default());
        for s in &sets {
            prop_assert!(s.is_valid(), "invalid set {}", s.id());
        }
        let trials: Vec<Trial> = sets.iter().flat_map(make_items).collect();
        let mut buf = Vec::new();
        write_trial_manifest(&trials, &mut buf).unwrap();
        prop_assert_eq!(read_trial_manifest(&buf).unwrap(), trials);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mfcc_frame_count_and_finiteness(len in 400usize..6000, seed in any::<u64>(), silent in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples: Vec<f64> = (0..len)
            .map(|_| if silent { 0.0 } else { rng.random_range(-0.5..0.5) })
            .collect();
        let config = MfccConfig::default();
        let wave = Waveform { samples, sample_rate: 16_000 };
        let seq = baseline_features(&wave, &config).unwrap();
        prop_assert_eq!(seq.len(), (len - 400) / 160 + 1);
        prop_assert_eq!(seq.dim(), 39);
        prop_assert!(seq.frames().all(|f| f.iter().all(|v| v.is_finite())));
    }

    #[test]
    fn probit_score_equations_and_rescaling(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 400;
        let mut x = DMatrix::zeros(n, 3);
        let mut y = DVector::zeros(n);
        for i in 0..n {
            let delta: f64 = rng.random_range(-2.0..2.0);
            let second = f64::from(rng.random_range(0..2u8));
            x[(i, 0)] = 1.0;
            x[(i, 1)] = delta;
            x[(i, 2)] = second;
            let eta = 0.3 + 0.8 * delta - 0.2 * second;
            let noise: f64 = rng.sample(rand_distr::StandardNormal);
            y[i] = if eta + noise > 0.0 { 1.0 } else { 0.0 };
        }
        let fit = fit_probit(&x, &y).unwrap();
        prop_assert!(fit.converged);
        prop_assert!(fit.gradient_norm <= 1e-8, "gradient {} after {} iterations", fit.gradient_norm, fit.iterations);
        prop_assert!(fit.log_likelihood <= 0.0);
        prop_assert!((log_likelihood(&x, &y, &fit.coefficients) - fit.log_likelihood).abs() < 1e-9);

        let mut scaled = x.clone();
        scaled.column_mut(1).scale_mut(10.0);
        let refit = fit_probit(&scaled, &y).unwrap();
        prop_assert!((refit.log_likelihood - fit.log_likelihood).abs() < 1e-6);
        prop_assert!((refit.coefficients[1] * 10.0 - fit.coefficients[1]).abs() < 1e-6);
    }
}

fn trial(id: &str, target: &str, other: &str, probe: &str, order: Order, contrast: &str, language: Language) -> Trial {
    Trial {
        trial_id: id.into(),
        target_id: target.into(),
        other_id: other.into(),
        probe_id: probe.into(),
        order,
        contrast: contrast.into(),
        context: "p_t".into(),
        language,
        ref_speaker: "s1".into(),
        probe_speaker: "s2".into(),
    }
}

fn manifest_row() -> impl Strategy<Value = Vec<String>> {
    let id = "[a-c]{1,2}";
    let order = prop::sample::select(vec!["AB_A", "AB_B", "BA_A", "BA_B"]);
    let language = prop::sample::select(vec!["native", "other"]);
    let speaker = prop::sample::select(vec!["s1", "s2", "s3"]);
    (id, id, id, id, order, language, speaker.clone(), speaker).prop_map(
        |(t, a, b, x, order, lang, rs, ps)| {
            vec![t, a, b, x, order.into(), "a-i".into(), "p_t".into(), lang.into(), rs.into(), ps.into()]
        },
    )
}

/// Three speakers, a few utterances each, phones drawn from a small inventory
/// so matching contexts are common.
fn random_alignment(seed: u64) -> Vec<AlignmentEntry> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let consonants = ["p", "t", "k"];
    let vowels = ["a", "i", "u"];
    let mut entries = Vec::new();
    for speaker in ["s1", "s2", "s3"] {
        for u in 0..rng.random_range(1..4) {
            let mut t = 0.0;
            for k in 0..rng.random_range(3..8) {
                let inventory = if k % 2 == 0 { &consonants } else { &vowels };
                let dur = rng.random_range(0.03..0.2);
                entries.push(AlignmentEntry {
                    utterance_id: format!("{speaker}_u{u}"),
                    speaker_id: speaker.into(),
                    phone: inventory[rng.random_range(0..3)].into(),
                    start: t,
                    end: t + dur,
                });
                t += dur;
            }
        }
    }
    entries
}
