//! Synthetic end-to-end fixture and pipeline run.
//!
//! The fixture has two speakers reading consonant-vowel-consonant syllables
//! between silences. Each phone is a pure tone, and the second speaker's
//! tones are shifted up by 6%. Responses come from three simulated
//! populations: always correct, always wrong, and correct with
//! probability 0.8.

use std::collections::{BTreeSet, HashMap};
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::abx::{human_accuracy, model_accuracy, score_trials, write_records, AccuracyReport};
use crate::dataset::{
    assemble_trial_audio, check_lists, counterbalance, cut_segment, ingest_responses, make_items,
    mine_stimulus_sets, parse_alignment, write_lists, write_responses, write_stimulus_sets,
    HumanResponse, MiningFilter, Segment, StimulusSet,
};
use crate::feature_io::{write_trial_manifest, FeatureSequence, Language, Mode, Trial};
use crate::linking::{build_design, compare_models, fit_probit, CompareOptions, ComparisonMatrix, ProbitFit};
use crate::metrics::DivergenceKind;
use crate::mfcc::{baseline_features, read_wav, write_wav, MfccConfig, Waveform, SAMPLE_RATE};
use crate::output::{csv_io, Provenance};

pub const CENTRES: [&str; 4] = ["a", "e", "i", "u"];
const FRAMES: [(&str, &str); 2] = [("p", "t"), ("k", "s")];
pub const SPEAKERS: [&str; 2] = ["s1", "s2"];
const SILENCE_SECONDS: f64 = 0.05;
/// Oracle frames per second of phone duration.
const ORACLE_RATE: f64 = 100.0;

pub const POPULATIONS: [&str; 3] = ["correct", "inverted", "noisy"];
const PARTICIPANTS_PER_POPULATION: usize = 8;
const NOISY_ACCURACY: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SmokeConfig {
    pub seed: u64,
    pub list_size: usize,
    pub repetitions: usize,
    pub resamples: usize,
}

impl Default for SmokeConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            list_size: CENTRES.len() * (CENTRES.len() - 1) / 2,
            repetitions: 4,
            resamples: 50,
        }
    }
}

#[derive(Debug)]
pub struct SmokeError {
    pub stage: &'static str,
    pub message: String,
}

impl std::fmt::Display for SmokeError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "stage {}: {}", self.stage, self.message)
    }
}

impl std::error::Error for SmokeError {}

fn stage<E: std::fmt::Display>(stage: &'static str) -> impl Fn(E) -> SmokeError {
    move |e| SmokeError {
        stage,
        message: e.to_string(),
    }
}

fn frequency(phone: &str) -> f64 {
    match phone {
        "p" => 400.0,
        "t" => 3000.0,
        "k" => 1800.0,
        "s" => 5200.0,
        "a" => 700.0,
        "e" => 1100.0,
        "i" => 1500.0,
        "u" => 2300.0,
        _ => 0.0,
    }
}

/// Vowels differ in length so that oracle distances vary across contrasts.
fn duration(phone: &str) -> f64 {
    match phone {
        "a" => 0.08,
        "e" => 0.1,
        "i" => 0.12,
        "u" => 0.14,
        _ => 0.1,
    }
}

fn utterances() -> Vec<(String, &'static str, [&'static str; 3])> {
    let mut out = Vec::new();
    for speaker in SPEAKERS {
        for (left, right) in FRAMES {
            for v in CENTRES {
                out.push((format!("{speaker}-{left}{v}{right}"), speaker, [left, v, right]));
            }
        }
    }
    out
}

fn synthesize(speaker: &str, phones: &[&str; 3], rng: &mut ChaCha8Rng) -> Waveform {
    let shift = if speaker == SPEAKERS[0] { 1.0 } else { 1.06 };
    let rate = SAMPLE_RATE as f64;
    let sil = (SILENCE_SECONDS * rate) as usize;
    let mut samples = Vec::new();
    samples.extend((0..sil).map(|_| rng.random_range(-1e-3..1e-3)));
    for p in phones {
        let f = frequency(p) * shift;
        let n = (duration(p) * rate).round() as usize;
        samples.extend((0..n).map(|n| 0.5 * (2.0 * PI * f * n as f64 / rate).sin() + rng.random_range(-1e-3..1e-3)));
    }
    samples.extend((0..sil).map(|_| rng.random_range(-1e-3..1e-3)));
    Waveform {
        samples,
        sample_rate: SAMPLE_RATE,
    }
}

fn alignment_table() -> String {
    let mut s = String::from("utterance_id,speaker_id,phone,start,end\n");
    for (utt, speaker, phones) in utterances() {
        let mut t = 0.0;
        let mut row = |phone: &str, dur: f64| {
            let _ = writeln!(s, "{utt},{speaker},{phone},{t:.2},{:.2}", t + dur);
            t += dur;
        };
        row("sil", SILENCE_SECONDS);
        for p in phones {
            row(p, duration(p));
        }
        row("sil", SILENCE_SECONDS);
    }
    s
}

pub fn mining_filter() -> MiningFilter {
    MiningFilter {
        allowed_centres: Some(CENTRES.iter().map(|c| c.to_string()).collect()),
        excluded_contexts: BTreeSet::new(),
        language: Some(Language::Native),
    }
}

fn trials_of(sets: &[StimulusSet]) -> Vec<Trial> {
    sets.iter().flat_map(make_items).collect()
}

fn scale_for(trial: &Trial, correct: bool) -> u8 {
    use crate::feature_io::Position;
    match (trial.correct_position(), correct) {
        (Position::First, true) | (Position::Second, false) => 1,
        _ => 6,
    }
}

/// Writes the shipped fixture: `alignments.csv`, `wav/<utterance>.wav` and
/// `responses_<population>.csv`.
pub fn generate_fixture(dir: &Path, config: &SmokeConfig) -> Result<(), SmokeError> {
    let io_err = stage::<io::Error>("generate");
    std::fs::create_dir_all(dir.join("wav")).map_err(&io_err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for (utt, speaker, phones) in utterances() {
        let wave = synthesize(speaker, &phones, &mut rng);
        let file = std::fs::File::create(dir.join("wav").join(format!("{utt}.wav"))).map_err(&io_err)?;
        write_wav(&wave, io::BufWriter::new(file)).map_err(&io_err)?;
    }
    let alignments = alignment_table();
    std::fs::write(dir.join("alignments.csv"), &alignments).map_err(&io_err)?;

    let entries = parse_alignment(alignments.as_bytes()).map_err(stage("generate"))?;
    let trials = trials_of(&mine_stimulus_sets(&entries, &mining_filter()));
    let index: HashMap<&str, &Trial> = trials.iter().map(|t| (t.trial_id.as_str(), t)).collect();
    let lists = counterbalance(&trials, config.list_size, config.repetitions, config.seed)
        .map_err(stage("generate"))?;

    for (p, population) in POPULATIONS.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(p as u64 + 1);
        let mut responses = Vec::new();
        let mut next_index = [1u32; PARTICIPANTS_PER_POPULATION];
        for (l, list) in lists.iter().enumerate() {
            let who = l % PARTICIPANTS_PER_POPULATION;
            let participant = format!("{}{:02}", &population[..1], who + 1);
            for id in &list.trial_ids {
                let trial = index[id.as_str()];
                let correct = match *population {
                    "correct" => true,
                    "inverted" => false,
                    _ => rng.random_bool(NOISY_ACCURACY),
                };
                let r = HumanResponse::new(
                    participant.clone(),
                    &list.list_id,
                    next_index[who],
                    trial,
                    scale_for(trial, correct),
                    false,
                )
                .expect("scale in range");
                next_index[who] += 1;
                responses.push(r);
            }
        }
        let file = std::fs::File::create(dir.join(format!("responses_{population}.csv"))).map_err(&io_err)?;
        write_responses(&responses, io::BufWriter::new(file)).map_err(stage("generate"))?;
    }
    Ok(())
}

/// One-hot phone identity at 100 frames per second of each phone's
/// nominal duration. Identical for every speaker, so a probe's
/// representation equals its target's.
pub fn oracle_features(segment: &Segment, inventory: &[String]) -> FeatureSequence {
    let mut frames = Vec::new();
    for p in &segment.phones {
        let k = inventory.iter().position(|q| q == p).expect("phone in inventory");
        let mut v = vec![0.0; inventory.len()];
        v[k] = 1.0;
        frames.extend(std::iter::repeat_n(v, (duration(p) * ORACLE_RATE).round() as usize));
    }
    FeatureSequence::new(&segment.id, frames, Mode::General).expect("one-hot frames are valid")
}

#[derive(Debug, Clone)]
pub struct SmokeReport {
    pub sets: usize,
    pub trials: usize,
    pub lists: usize,
    pub list_violations: usize,
    pub audio_files: usize,
    pub audio_length_mismatches: usize,
    pub oracle_accuracy: f64,
    pub mfcc_accuracy: f64,
    /// Overall human accuracy per population, in [`POPULATIONS`] order.
    pub human_accuracy: Vec<f64>,
    /// Fits of the oracle model per population.
    pub fits: Vec<ProbitFit>,
    pub comparison: ComparisonMatrix,
}

impl SmokeReport {
    /// Properties the fixture is built to satisfy; empty when all hold.
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut check = |ok: bool, what: String| {
            if !ok {
                out.push(what);
            }
        };
        check(self.sets > 0, "no stimulus sets mined".into());
        check(self.trials == 4 * self.sets, format!("{} trials from {} sets", self.trials, self.sets));
        check(self.list_violations == 0, format!("{} list violations", self.list_violations));
        check(self.audio_length_mismatches == 0, format!("{} assembled files with wrong length", self.audio_length_mismatches));
        check(self.oracle_accuracy == 1.0, format!("oracle accuracy {}", self.oracle_accuracy));
        check(self.human_accuracy[0] == 1.0, format!("correct responders at {}", self.human_accuracy[0]));
        check(self.human_accuracy[1] == 0.0, format!("inverted responders at {}", self.human_accuracy[1]));
        for (p, fit) in self.fits.iter().enumerate().take(2) {
            check(fit.separation_flag, format!("{} responders: separation not flagged", POPULATIONS[p]));
        }
        for (p, fit) in self.fits.iter().enumerate() {
            let finite = fit.coefficients.iter().all(|c| c.is_finite()) && fit.log_likelihood.is_finite();
            check(finite, format!("{} responders: non-finite fit", POPULATIONS[p]));
        }
        check(
            self.comparison.cells.iter().all(|c| c.mean.is_finite()),
            "non-finite comparison cell".into(),
        );
        out
    }

    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "sets={}", self.sets);
        let _ = writeln!(s, "trials={}", self.trials);
        let _ = writeln!(s, "lists={}", self.lists);
        let _ = writeln!(s, "list_violations={}", self.list_violations);
        let _ = writeln!(s, "audio_files={}", self.audio_files);
        let _ = writeln!(s, "audio_length_mismatches={}", self.audio_length_mismatches);
        let _ = writeln!(s, "accuracy.oracle={}", self.oracle_accuracy);
        let _ = writeln!(s, "accuracy.mfcc={}", self.mfcc_accuracy);
        for (p, acc) in POPULATIONS.iter().zip(&self.human_accuracy) {
            let _ = writeln!(s, "accuracy.human.{p}={acc}");
        }
        for (p, fit) in POPULATIONS.iter().zip(&self.fits) {
            let _ = writeln!(s, "fit.{p}.separation_flag={}", fit.separation_flag);
            let _ = writeln!(s, "fit.{p}.log_likelihood={:e}", fit.log_likelihood);
        }
        for c in self.comparison.cells.iter().filter(|c| c.row != c.col) {
            let _ = writeln!(s, "compare.{}-{}={:e}", c.row, c.col, c.mean);
        }
        let failures = self.failures();
        let _ = writeln!(s, "status={}", if failures.is_empty() { "ok" } else { "failed" });
        for f in failures {
            let _ = writeln!(s, "failure={f}");
        }
        s
    }
}

fn write_file<F>(path: &Path, seed: u64, body: F) -> io::Result<()>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    crate::output::write_with_header(path, &Provenance::new("smoke", Some(seed)).with("file", name), body)
}

fn feature_map(seqs: Vec<FeatureSequence>) -> HashMap<String, FeatureSequence> {
    seqs.into_iter().map(|s| (s.stimulus_id().to_string(), s)).collect()
}

/// Runs mine, items, assembly, feature extraction, scoring, accuracy, fit
/// and comparison on `fixture`, writing intermediate files under `work`.
pub fn run_smoke(fixture: &Path, work: &Path, config: &SmokeConfig) -> Result<SmokeReport, SmokeError> {
    let read = |stage_name: &'static str, p: PathBuf| std::fs::read(&p).map_err(|e| SmokeError {
        stage: stage_name,
        message: format!("{}: {e}", p.display()),
    });
    let out = |stage_name: &'static str| stage::<io::Error>(stage_name);

    // mine
    let entries = parse_alignment(&read("mine", fixture.join("alignments.csv"))?).map_err(stage("mine"))?;
    let sets = mine_stimulus_sets(&entries, &mining_filter());
    write_file(&work.join("sets.csv"), config.seed, |w| write_stimulus_sets(&sets, w).map_err(csv_io)).map_err(out("mine"))?;

    // items and lists
    let trials = trials_of(&sets);
    write_file(&work.join("trials.csv"), config.seed, |w| write_trial_manifest(&trials, w).map_err(csv_io))
        .map_err(out("make-items"))?;
    let lists = counterbalance(&trials, config.list_size, config.repetitions, config.seed)
        .map_err(stage("counterbalance"))?;
    let list_violations = check_lists(&lists, &trials, config.list_size, config.repetitions).violations.len();
    write_file(&work.join("lists.csv"), config.seed, |w| write_lists(&lists, w).map_err(csv_io)).map_err(out("counterbalance"))?;

    // audio
    let mut waves: HashMap<String, Waveform> = HashMap::new();
    for e in &entries {
        if !waves.contains_key(&e.utterance_id) {
            let bytes = read("assemble", fixture.join("wav").join(format!("{}.wav", e.utterance_id)))?;
            waves.insert(e.utterance_id.clone(), read_wav(&bytes).map_err(stage("assemble"))?);
        }
    }
    let mut segments: HashMap<String, Segment> = HashMap::new();
    for s in &sets {
        for seg in [&s.a, &s.b, &s.x] {
            segments.entry(seg.id.clone()).or_insert_with(|| seg.clone());
        }
    }
    let clips: HashMap<String, Waveform> = segments
        .values()
        .map(|seg| Ok((seg.id.clone(), cut_segment(&waves[&seg.utterance_id], seg.start, seg.end)?)))
        .collect::<Result<_, crate::dataset::DatasetError>>()
        .map_err(stage("assemble"))?;
    let audio_dir = work.join("audio");
    let mismatches = trials
        .par_iter()
        .map(|t| -> Result<usize, SmokeError> {
            let (first, second, probe) = t.presentation();
            let (f, s, x) = (&clips[first], &clips[second], &clips[probe]);
            let wave = assemble_trial_audio(f, s, x).map_err(stage("assemble"))?;
            let expected = f.samples.len() + s.samples.len() + x.samples.len() + 8000 + 10400;
            crate::output::write_atomic(&audio_dir.join(format!("{}.wav", t.trial_id)), |w| write_wav(&wave, w))
                .map_err(out("assemble"))?;
            Ok(usize::from(wave.samples.len() != expected))
        })
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .sum();

    // features
    let cfg = MfccConfig::default();
    let mut ids: Vec<&String> = segments.keys().collect();
    ids.sort();
    let mfcc = ids
        .par_iter()
        .map(|id| {
            let mut f = baseline_features(&clips[*id], &cfg)?;
            f.set_stimulus_id(id.as_str());
            Ok(f)
        })
        .collect::<Result<Vec<_>, crate::mfcc::AudioError>>()
        .map_err(stage("extract-mfcc"))?;
    let inventory: Vec<String> = entries
        .iter()
        .map(|e| e.phone.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let oracle: Vec<FeatureSequence> = ids.iter().map(|id| oracle_features(&segments[*id], &inventory)).collect();
    for (name, seqs) in [("mfcc", &mfcc), ("oracle", &oracle)] {
        let dir = work.join("features").join(name);
        for f in seqs.iter() {
            crate::output::write_atomic(&dir.join(format!("{}.feat", f.stimulus_id())), |w| f.write_to(w)).map_err(out("extract-mfcc"))?;
        }
    }

    // score
    let mut models = Vec::new();
    for (name, seqs) in [("mfcc", mfcc), ("oracle", oracle)] {
        let records = score_trials(&trials, &feature_map(seqs), DivergenceKind::AngularCosine).map_err(stage("score"))?;
        write_file(&work.join(format!("records_{name}.csv")), config.seed, |w| write_records(&records, w).map_err(csv_io))
            .map_err(out("score"))?;
        models.push((name.to_string(), records));
    }

    // accuracy
    let model_acc = |records| -> Result<AccuracyReport, SmokeError> {
        model_accuracy(records, &trials).map_err(stage("accuracy"))
    };
    let mfcc_report = model_acc(&models[0].1)?;
    let oracle_report = model_acc(&models[1].1)?;
    let mut populations = Vec::new();
    let mut human = Vec::new();
    for p in POPULATIONS {
        let bytes = read("accuracy", fixture.join(format!("responses_{p}.csv")))?;
        let responses = ingest_responses(&bytes, &trials).map_err(stage("accuracy"))?;
        let report = human_accuracy(&responses, &trials).map_err(stage("accuracy"))?;
        write_file(&work.join(format!("accuracy_human_{p}.csv")), config.seed, |w| report.write_csv(w).map_err(csv_io))
            .map_err(out("accuracy"))?;
        human.push(report.overall);
        populations.push(responses);
    }

    // fit
    let fits = populations
        .iter()
        .map(|responses| {
            let (design, y) = build_design(responses, &models[1].1, &trials)?;
            fit_probit(&design.x, &y)
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(stage("fit"))?;

    // compare
    let opts = CompareOptions {
        resamples: config.resamples,
        seed: config.seed,
        ..Default::default()
    };
    let comparison = compare_models(&models, &populations[2], &trials, &opts).map_err(stage("compare"))?;
    write_file(&work.join("comparison.csv"), config.seed, |w| comparison.write_csv(w).map_err(csv_io)).map_err(out("compare"))?;

    Ok(SmokeReport {
        sets: sets.len(),
        trials: trials.len(),
        lists: lists.len(),
        list_violations,
        audio_files: trials.len(),
        audio_length_mismatches: mismatches,
        oracle_accuracy: oracle_report.overall,
        mfcc_accuracy: mfcc_report.overall,
        human_accuracy: human,
        fits,
        comparison,
    })
}

/// Location of the fixture shipped with the crate.
pub fn shipped_fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join("smoke")
}
