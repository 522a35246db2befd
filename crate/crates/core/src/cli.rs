//! The `abxkit` command line.
//!
//! Exit status is 0 on success, 1 on input or validation errors (reported on
//! stderr as a single `error[<kind>]: <message>` line) and 2 on usage
//! errors. `ABXKIT_THREADS` sets the worker count and `ABXKIT_TMPDIR` the
//! scratch directory for `smoke`.

use std::collections::{BTreeSet, HashMap};
use std::ffi::OsString;
use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::abx::{
    human_accuracy, model_accuracy, read_records, scatter_export, score_trials, write_records,
    DiscriminabilityRecord,
};
use crate::dataset::{
    assemble_trial_audio, check_lists, counterbalance, cut_segment, ingest_responses, make_items,
    mine_stimulus_sets, parse_alignment, read_lists, read_stimulus_sets, validate_participants,
    write_lists, write_normalized_responses, write_stimulus_sets, HumanResponse, MiningFilter, Segment,
    ValidationConfig,
};
use crate::feature_io::{load_feature_file, read_trial_manifest, write_trial_manifest, FeatureSequence, Language, Mode, Trial};
use crate::linking::{build_design, compare_models, fit_probit_with, fit_summary, CompareOptions, ProbitOptions};
use crate::metrics::DivergenceKind;
use crate::mfcc::{baseline_features, read_wav, write_wav, MfccConfig, Waveform};
use crate::output::{csv_io, write_atomic, write_with_header, Provenance};
use crate::smoke::{generate_fixture, run_smoke, shipped_fixture, SmokeConfig};

#[derive(Debug, Parser)]
#[command(name = "abxkit", version, about = "ABX discrimination scoring and benchmark construction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// MFCC + Δ + ΔΔ with moving mean-variance normalization, one .feat per input
    ExtractMfcc(ExtractArgs),
    /// DTW discriminability records for every trial
    Score(ScoreArgs),
    /// Accuracy by stimulus, contrast and language
    Accuracy(AccuracyArgs),
    /// Per-contrast human accuracy against mean δ, z-scored within language
    Scatter(ScatterArgs),
    /// Probit fit of human correctness on δ and nuisance covariates
    Fit(FitArgs),
    /// Resampled log-likelihood comparison of several models
    Compare(CompareArgs),
    /// Enumerate stimulus sets from phone alignments
    Mine(MineArgs),
    /// Expand stimulus sets into the four ABX orders
    MakeItems(MakeItemsArgs),
    /// Build trial audio from utterance WAVs
    Assemble(AssembleArgs),
    /// Assign trials to experiment lists
    Counterbalance(CounterbalanceArgs),
    /// Verify list constraints
    CheckLists(CheckListsArgs),
    /// Validate and normalize a raw response table
    IngestResponses(IngestArgs),
    /// Accept or reject participants from catch trials and completion
    ValidateParticipants(ValidateArgs),
    /// End-to-end run on the synthetic fixture
    Smoke(SmokeArgs),
}

#[derive(Debug, Args)]
struct ExtractArgs {
    /// A WAV file or a directory of WAV files
    #[arg(long)]
    input: PathBuf,
    /// Stimulus-set table; when given, cut each segment out of `<input>/<utterance>.wav`
    #[arg(long)]
    segments: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    /// Directory of `<stimulus_id>.feat` files
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    trials: PathBuf,
    #[arg(long, default_value = "cosine")]
    gamma: DivergenceKind,
    #[arg(long, default_value = "general")]
    mode: Mode,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct AccuracyArgs {
    #[arg(long)]
    trials: PathBuf,
    /// Model records (δ > 0 counts as correct)
    #[arg(long, conflicts_with = "responses", required_unless_present = "responses")]
    records: Option<PathBuf>,
    /// Human responses (catch trials are ignored)
    #[arg(long)]
    responses: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ScatterArgs {
    #[arg(long)]
    records: PathBuf,
    #[arg(long)]
    responses: PathBuf,
    #[arg(long)]
    trials: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[arg(long)]
    records: PathBuf,
    #[arg(long)]
    responses: PathBuf,
    #[arg(long)]
    trials: PathBuf,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u32).range(1..=10_000))]
    max_iterations: u32,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// `name=records.csv` pairs, comma separated
    #[arg(long, value_delimiter = ',', required = true)]
    models: Vec<String>,
    #[arg(long)]
    responses: PathBuf,
    #[arg(long)]
    trials: PathBuf,
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u32).range(1..=1_000_000))]
    resamples: u32,
    #[arg(long)]
    seed: u64,
    /// Fit once on all responses and only evaluate on each subsample
    #[arg(long)]
    no_refit: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct MineArgs {
    #[arg(long)]
    alignments: PathBuf,
    #[arg(long, default_value = "native")]
    language: Language,
    /// Restrict both centre phones to this set
    #[arg(long, value_delimiter = ',')]
    centres: Option<Vec<String>>,
    /// Contexts (`left_right`) to skip
    #[arg(long, value_delimiter = ',')]
    exclude_contexts: Vec<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct MakeItemsArgs {
    #[arg(long)]
    sets: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct AssembleArgs {
    #[arg(long)]
    trials: PathBuf,
    /// Stimulus-set table giving each segment's utterance and times
    #[arg(long)]
    sets: PathBuf,
    /// Directory of `<utterance_id>.wav`
    #[arg(long)]
    wav_dir: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct CounterbalanceArgs {
    #[arg(long)]
    trials: PathBuf,
    #[arg(long, default_value_t = 190, value_parser = clap::value_parser!(u32).range(1..=100_000))]
    list_size: u32,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..=1000))]
    repetitions: u32,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct CheckListsArgs {
    #[arg(long)]
    lists: PathBuf,
    #[arg(long)]
    trials: PathBuf,
    #[arg(long, default_value_t = 190, value_parser = clap::value_parser!(u32).range(1..=100_000))]
    list_size: u32,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..=1000))]
    repetitions: u32,
}

#[derive(Debug, Args)]
struct IngestArgs {
    #[arg(long)]
    responses: PathBuf,
    #[arg(long)]
    trials: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long)]
    responses: PathBuf,
    #[arg(long)]
    trials: PathBuf,
    #[arg(long, default_value_t = 12)]
    catch_total: usize,
    #[arg(long, default_value_t = 3)]
    fail_threshold: usize,
    #[arg(long, default_value_t = 190)]
    expected_trials: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SmokeArgs {
    /// Fixture directory; defaults to the one shipped with the crate
    #[arg(long)]
    fixture: Option<PathBuf>,
    /// Directory for intermediate files; defaults to a fresh directory
    /// under `ABXKIT_TMPDIR` or the system temp dir
    #[arg(long)]
    work: Option<PathBuf>,
    /// Write a new fixture to this directory instead of running
    #[arg(long)]
    generate: Option<PathBuf>,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u32).range(1..=100_000))]
    resamples: u32,
    /// Report file; printed to stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A failure reported as `error[<kind>]: <message>`.
#[derive(Debug)]
pub struct CliError {
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    fn new(kind: &'static str, message: impl Display) -> Self {
        Self {
            kind,
            message: message.to_string().replace('\n', "; "),
        }
    }
}

impl Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "error[{}]: {}", self.kind, self.message)
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn err<E: Display>(kind: &'static str) -> impl Fn(E) -> CliError {
    move |e| CliError::new(kind, e)
}

fn with_path<'a, E: Display>(kind: &'static str, path: &'a Path) -> impl Fn(E) -> CliError + 'a {
    move |e| CliError::new(kind, format!("{}: {e}", path.display()))
}

fn read(path: &Path) -> CliResult<Vec<u8>> {
    std::fs::read(path).map_err(with_path("io", path))
}

fn load_trials(path: &Path) -> CliResult<Vec<Trial>> {
    read_trial_manifest(&read(path)?).map_err(with_path("parse", path))
}

fn load_records(path: &Path) -> CliResult<Vec<DiscriminabilityRecord>> {
    read_records(&read(path)?).map_err(with_path("parse", path))
}

fn load_responses(path: &Path, trials: &[Trial]) -> CliResult<Vec<HumanResponse>> {
    ingest_responses(&read(path)?, trials).map_err(with_path("responses", path))
}

fn load_wav(path: &Path) -> CliResult<Waveform> {
    read_wav(&read(path)?).map_err(with_path("audio", path))
}

fn write_csv<F>(path: &Path, provenance: &Provenance, body: F) -> CliResult
where
    F: FnOnce(&mut dyn Write) -> csv::Result<()>,
{
    write_with_header(path, provenance, |w| body(w).map_err(csv_io)).map_err(with_path("io", path))
}

fn feature_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(with_path("io", dir))? {
        let path = entry.map_err(with_path("io", dir))?.path();
        if path.extension().is_some_and(|e| e == "feat") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn wav_files(input: &Path) -> CliResult<Vec<PathBuf>> {
    if input.is_file() {
        return Ok(vec![input.to_path_buf()]);
    }
    let mut files = Vec::new();
    for entry in std::fs::read_dir(input).map_err(with_path("io", input))? {
        let path = entry.map_err(with_path("io", input))?.path();
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav")) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn segments_of(path: &Path) -> CliResult<Vec<Segment>> {
    let sets = read_stimulus_sets(&read(path)?).map_err(with_path("parse", path))?;
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for s in sets {
        for seg in [s.a, s.b, s.x] {
            if seen.insert(seg.id.clone()) {
                out.push(seg);
            }
        }
    }
    out.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(out)
}

fn write_feature(dir: &Path, seq: &FeatureSequence) -> CliResult {
    let path = dir.join(format!("{}.feat", seq.stimulus_id()));
    write_atomic(&path, |w| seq.write_to(w)).map_err(with_path("io", &path))
}

fn extract_mfcc(args: &ExtractArgs) -> CliResult {
    let cfg = MfccConfig::default();
    let prov = Provenance::new("extract-mfcc", None)
        .with("window", cfg.window_samples)
        .with("hop", cfg.hop_samples)
        .with("filters", cfg.num_filters)
        .with("coefficients", cfg.num_ceps)
        .with("deltas", "2")
        .with("mvn_window", crate::mfcc::MVN_WINDOW_FRAMES);
    let features = match &args.segments {
        None => wav_files(&args.input)?
            .par_iter()
            .map(|path| {
                let wave = load_wav(path)?;
                let mut seq = baseline_features(&wave, &cfg).map_err(with_path("audio", path))?;
                let stem = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
                seq.set_stimulus_id(stem);
                Ok(seq)
            })
            .collect::<CliResult<Vec<_>>>()?,
        Some(sets) => {
            let segments = segments_of(sets)?;
            let utterances: BTreeSet<&str> = segments.iter().map(|s| s.utterance_id.as_str()).collect();
            let waves: HashMap<&str, Waveform> = utterances
                .into_par_iter()
                .map(|u| Ok((u, load_wav(&args.input.join(format!("{u}.wav")))?)))
                .collect::<CliResult<_>>()?;
            segments
                .par_iter()
                .map(|seg| {
                    let clip = cut_segment(&waves[seg.utterance_id.as_str()], seg.start, seg.end)
                        .map_err(|e| CliError::new("dataset", format!("segment {}: {e}", seg.id)))?;
                    let mut seq = baseline_features(&clip, &cfg)
                        .map_err(|e| CliError::new("audio", format!("segment {}: {e}", seg.id)))?;
                    seq.set_stimulus_id(seg.id.as_str());
                    Ok(seq)
                })
                .collect::<CliResult<Vec<_>>>()?
        }
    };
    features
        .par_iter()
        .try_for_each(|seq| write_feature(&args.out_dir, seq))?;
    let index = args.out_dir.join("index.csv");
    write_with_header(&index, &prov, |w| {
        writeln!(w, "stimulus_id,frames,dim")?;
        for seq in &features {
            writeln!(w, "{},{},{}", seq.stimulus_id(), seq.len(), seq.dim())?;
        }
        Ok(())
    })
    .map_err(with_path("io", &index))?;
    log::info!("wrote {} feature files to {}", features.len(), args.out_dir.display());
    Ok(())
}

fn score(args: &ScoreArgs) -> CliResult {
    let trials = load_trials(&args.trials)?;
    let features: HashMap<String, FeatureSequence> = feature_files(&args.features)?
        .par_iter()
        .map(|p| {
            let seq = load_feature_file(p, args.mode).map_err(with_path("parse", p))?;
            Ok((seq.stimulus_id().to_string(), seq))
        })
        .collect::<CliResult<_>>()?;
    let records = score_trials(&trials, &features, args.gamma).map_err(err("score"))?;
    let prov = Provenance::new("score", None)
        .with("gamma", args.gamma.as_str())
        .with("mode", format!("{:?}", args.mode).to_lowercase())
        .with("trials", args.trials.display());
    write_csv(&args.out, &prov, |w| write_records(&records, w))
}

fn accuracy(args: &AccuracyArgs) -> CliResult {
    let trials = load_trials(&args.trials)?;
    let (report, source) = match (&args.records, &args.responses) {
        (Some(r), _) => (model_accuracy(&load_records(r)?, &trials).map_err(err("score"))?, r),
        (None, Some(r)) => (human_accuracy(&load_responses(r, &trials)?, &trials).map_err(err("score"))?, r),
        (None, None) => unreachable!("clap requires one source"),
    };
    let prov = Provenance::new("accuracy", None).with("input", source.display());
    write_csv(&args.out, &prov, |w| report.write_csv(w))
}

fn scatter(args: &ScatterArgs) -> CliResult {
    let trials = load_trials(&args.trials)?;
    let records = load_records(&args.records)?;
    let responses = load_responses(&args.responses, &trials)?;
    let table = scatter_export(&records, &responses, &trials).map_err(err("score"))?;
    for s in &table.skipped {
        log::warn!("contrast {s} has data on one side only; skipped");
    }
    let prov = Provenance::new("scatter", None).with("records", args.records.display());
    write_csv(&args.out, &prov, |w| table.write_csv(w))
}

fn fit(args: &FitArgs) -> CliResult {
    let trials = load_trials(&args.trials)?;
    let records = load_records(&args.records)?;
    let responses = load_responses(&args.responses, &trials)?;
    let (design, y) = build_design(&responses, &records, &trials).map_err(err("link"))?;
    let opts = ProbitOptions {
        max_iterations: args.max_iterations as usize,
        ..Default::default()
    };
    let fit = fit_probit_with(&design.x, &y, &opts).map_err(err("link"))?;
    let prov = Provenance::new("fit", None)
        .with("records", args.records.display())
        .with("max_iterations", opts.max_iterations);
    let mut text = format!("observations={}\n", y.len());
    text.push_str(&fit_summary(&design.names, &fit));
    for w in &design.warnings {
        text.push_str(&format!("warning={w}\n"));
    }
    write_with_header(&args.out, &prov, |w| w.write_all(text.as_bytes())).map_err(with_path("io", &args.out))
}

fn compare(args: &CompareArgs) -> CliResult {
    let trials = load_trials(&args.trials)?;
    let responses = load_responses(&args.responses, &trials)?;
    let mut models = Vec::new();
    let mut names = BTreeSet::new();
    for spec in &args.models {
        let (name, path) = spec
            .split_once('=')
            .filter(|(n, p)| !n.is_empty() && !p.is_empty())
            .ok_or_else(|| CliError::new("usage", format!("--models entry {spec:?} is not name=path")))?;
        if !names.insert(name.to_string()) {
            return Err(CliError::new("usage", format!("model {name} given twice")));
        }
        models.push((name.to_string(), load_records(Path::new(path))?));
    }
    let opts = CompareOptions {
        resamples: args.resamples as usize,
        seed: args.seed,
        refit: !args.no_refit,
        ..Default::default()
    };
    let matrix = compare_models(&models, &responses, &trials, &opts).map_err(err("link"))?;
    let prov = Provenance::new("compare", Some(args.seed))
        .with("resamples", opts.resamples)
        .with("per_stimulus", opts.per_stimulus)
        .with("refit", opts.refit)
        .with("subsample_size", matrix.subsample_size)
        .with("models", matrix.models.join("|"));
    write_csv(&args.out, &prov, |w| matrix.write_csv(w))
}

fn mine(args: &MineArgs) -> CliResult {
    let entries = parse_alignment(&read(&args.alignments)?).map_err(with_path("dataset", &args.alignments))?;
    let filter = MiningFilter {
        allowed_centres: args.centres.as_ref().map(|c| c.iter().cloned().collect()),
        excluded_contexts: args.exclude_contexts.iter().cloned().collect(),
        language: Some(args.language),
    };
    let sets = mine_stimulus_sets(&entries, &filter);
    log::info!("mined {} stimulus sets", sets.len());
    let prov = Provenance::new("mine", None)
        .with("language", args.language.as_str())
        .with("centres", args.centres.as_ref().map_or("any".to_string(), |c| c.join("|")))
        .with("exclude_contexts", args.exclude_contexts.join("|"));
    write_csv(&args.out, &prov, |w| write_stimulus_sets(&sets, w))
}

fn make_items_cmd(args: &MakeItemsArgs) -> CliResult {
    let sets = read_stimulus_sets(&read(&args.sets)?).map_err(with_path("parse", &args.sets))?;
    let trials: Vec<Trial> = sets.iter().flat_map(make_items).collect();
    let prov = Provenance::new("make-items", None).with("sets", args.sets.display());
    write_csv(&args.out, &prov, |w| write_trial_manifest(&trials, w))
}

fn assemble(args: &AssembleArgs) -> CliResult {
    let trials = load_trials(&args.trials)?;
    let segments: HashMap<String, Segment> = segments_of(&args.sets)?
        .into_iter()
        .map(|s| (s.id.clone(), s))
        .collect();
    let needed: BTreeSet<&str> = trials
        .iter()
        .flat_map(|t| [t.target_id.as_str(), t.other_id.as_str(), t.probe_id.as_str()])
        .collect();
    let mut utterances = BTreeSet::new();
    for id in &needed {
        let seg = segments
            .get(*id)
            .ok_or_else(|| CliError::new("dataset", format!("stimulus {id} is not in {}", args.sets.display())))?;
        utterances.insert(seg.utterance_id.as_str());
    }
    let waves: HashMap<&str, Waveform> = utterances
        .into_par_iter()
        .map(|u| Ok((u, load_wav(&args.wav_dir.join(format!("{u}.wav")))?)))
        .collect::<CliResult<_>>()?;
    let clips: HashMap<&str, Waveform> = needed
        .into_par_iter()
        .map(|id| {
            let seg = &segments[id];
            let clip = cut_segment(&waves[seg.utterance_id.as_str()], seg.start, seg.end)
                .map_err(|e| CliError::new("dataset", format!("segment {id}: {e}")))?;
            Ok((id, clip))
        })
        .collect::<CliResult<_>>()?;
    trials.par_iter().try_for_each(|t| {
        let (first, second, probe) = t.presentation();
        let wave = assemble_trial_audio(&clips[first], &clips[second], &clips[probe])
            .map_err(|e| CliError::new("dataset", format!("trial {}: {e}", t.trial_id)))?;
        let path = args.out_dir.join(format!("{}.wav", t.trial_id));
        write_atomic(&path, |w| write_wav(&wave, w)).map_err(with_path("io", &path))
    })?;
    log::info!("assembled {} trials into {}", trials.len(), args.out_dir.display());
    Ok(())
}

fn counterbalance_cmd(args: &CounterbalanceArgs) -> CliResult {
    let trials = load_trials(&args.trials)?;
    let lists = counterbalance(&trials, args.list_size as usize, args.repetitions as usize, args.seed)
        .map_err(err("dataset"))?;
    let prov = Provenance::new("counterbalance", Some(args.seed))
        .with("list_size", args.list_size)
        .with("repetitions", args.repetitions);
    write_csv(&args.out, &prov, |w| write_lists(&lists, w))
}

fn check_lists_cmd(args: &CheckListsArgs) -> CliResult {
    let trials = load_trials(&args.trials)?;
    let lists = read_lists(&read(&args.lists)?).map_err(with_path("parse", &args.lists))?;
    let report = check_lists(&lists, &trials, args.list_size as usize, args.repetitions as usize);
    let mut out = std::io::stdout().lock();
    for v in &report.violations {
        let _ = writeln!(out, "{v}");
    }
    if report.is_valid() {
        let _ = writeln!(out, "ok: {} lists", lists.len());
        Ok(())
    } else {
        Err(CliError::new("lists", format!("{} violations", report.violations.len())))
    }
}

fn ingest(args: &IngestArgs) -> CliResult {
    let trials = load_trials(&args.trials)?;
    let mut responses = load_responses(&args.responses, &trials)?;
    responses.sort_by(|a, b| {
        (a.participant_id.as_str(), a.trial_index).cmp(&(b.participant_id.as_str(), b.trial_index))
    });
    let prov = Provenance::new("ingest-responses", None).with("responses", args.responses.display());
    write_csv(&args.out, &prov, |w| write_normalized_responses(&responses, w))
}

fn validate(args: &ValidateArgs) -> CliResult {
    let trials = load_trials(&args.trials)?;
    let responses = load_responses(&args.responses, &trials)?;
    let config = ValidationConfig {
        catch_total: args.catch_total,
        fail_threshold: args.fail_threshold,
        expected_trials: args.expected_trials,
    };
    let verdicts = validate_participants(&responses, config);
    let prov = Provenance::new("validate-participants", None)
        .with("catch_total", config.catch_total)
        .with("fail_threshold", config.fail_threshold)
        .with("expected_trials", config.expected_trials);
    write_csv(&args.out, &prov, |w| {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["participant_id", "accepted", "catch_failures", "catch_answered", "answered", "reasons"])?;
        for v in &verdicts {
            w.write_record([
                v.participant_id.as_str(),
                if v.accepted { "1" } else { "0" },
                &v.catch_failures.to_string(),
                &v.catch_answered.to_string(),
                &v.answered.to_string(),
                &v.reasons.join("; "),
            ])?;
        }
        w.flush()?;
        Ok(())
    })
}

fn scratch_root() -> PathBuf {
    std::env::var_os("ABXKIT_TMPDIR")
        .map(PathBuf::from)
        .unwrap_or_else(std::env::temp_dir)
}

fn smoke(args: &SmokeArgs) -> CliResult {
    let config = SmokeConfig {
        seed: args.seed,
        resamples: args.resamples as usize,
        ..Default::default()
    };
    if let Some(dir) = &args.generate {
        return generate_fixture(dir, &config).map_err(err("smoke"));
    }
    let fixture = args.fixture.clone().unwrap_or_else(shipped_fixture);
    let scratch;
    let work = match &args.work {
        Some(w) => w.clone(),
        None => {
            let root = scratch_root();
            std::fs::create_dir_all(&root).map_err(with_path("io", &root))?;
            scratch = tempfile::Builder::new()
                .prefix("abxkit-smoke-")
                .tempdir_in(&root)
                .map_err(with_path("io", &root))?;
            scratch.path().to_path_buf()
        }
    };
    let report = run_smoke(&fixture, &work, &config).map_err(err("smoke"))?;
    let prov = Provenance::new("smoke", Some(config.seed))
        .with("resamples", config.resamples)
        .with("list_size", config.list_size)
        .with("repetitions", config.repetitions);
    let text = report.to_key_values();
    match &args.out {
        Some(path) => write_with_header(path, &prov, |w| w.write_all(text.as_bytes())).map_err(with_path("io", path))?,
        None => print!("{}\n{text}", prov.line()),
    }
    let failures = report.failures();
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::new("smoke", failures.join("; ")))
    }
}

fn configure_threads() {
    let Some(n) = std::env::var("ABXKIT_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) else {
        return;
    };
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
        log::debug!("thread pool already configured: {e}");
    }
}

fn dispatch(command: &Command) -> CliResult {
    match command {
        Command::ExtractMfcc(a) => extract_mfcc(a),
        Command::Score(a) => score(a),
        Command::Accuracy(a) => accuracy(a),
        Command::Scatter(a) => scatter(a),
        Command::Fit(a) => fit(a),
        Command::Compare(a) => compare(a),
        Command::Mine(a) => mine(a),
        Command::MakeItems(a) => make_items_cmd(a),
        Command::Assemble(a) => assemble(a),
        Command::Counterbalance(a) => counterbalance_cmd(a),
        Command::CheckLists(a) => check_lists_cmd(a),
        Command::IngestResponses(a) => ingest(a),
        Command::ValidateParticipants(a) => validate(a),
        Command::Smoke(a) => smoke(a),
    }
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    configure_threads();
    match dispatch(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            1
        }
    }
}
