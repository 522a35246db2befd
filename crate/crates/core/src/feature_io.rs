//! Feature files and trial manifests.
//!
//! A feature file holds one stimulus representation:
//!
//! ```text
//! stimulus_id=s1-w0
//! dim=2
//! 0.25 0.75
//! 0.5 0.5
//! ```
//!
//! Leading lines starting with `#` are treated as comments (provenance
//! headers). The `stimulus_id=` line may be omitted when the caller supplies
//! the id from the file name, see [`load_feature_file`].

use std::collections::HashSet;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

/// Replacement value for exact zeros in probability frames.
pub const PROBABILITY_FLOOR: f64 = 1e-10;

/// Tolerance on the row sum of a probability frame before renormalization.
pub const PROBABILITY_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("line {line}: malformed header: {message}")]
    Header { line: usize, message: String },
    #[error("line {line}: expected {expected} values, found {found}")]
    Arity {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: non-finite or unparsable value {token:?}")]
    Value { line: usize, token: String },
    #[error("empty sequence: no frames after header")]
    Empty,
    #[error("line {line}: negative probability {value}")]
    NegativeProbability { line: usize, value: f64 },
    #[error("line {line}: probability frame sums to {sum}, not 1")]
    ProbabilitySum { line: usize, sum: f64 },
    #[error("stimulus id mismatch: file name says {file:?}, header says {header:?}")]
    IdMismatch { file: String, header: String },
    #[error("content is not valid UTF-8")]
    Utf8,
    #[error("line {line}: {message}")]
    Manifest { line: usize, message: String },
    #[error("duplicate trial_id {0:?}")]
    DuplicateTrial(String),
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
}

/// How frame values are interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    General,
    Probability,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "general" => Ok(Mode::General),
            "probability" => Ok(Mode::Probability),
            other => Err(format!("unknown mode {other:?} (expected general|probability)")),
        }
    }
}

/// A stimulus representation: a non-empty sequence of fixed-dimension frames.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    stimulus_id: String,
    dim: usize,
    mode: Mode,
    // row-major, frames * dim
    data: Vec<f64>,
}

impl FeatureSequence {
    /// Builds a validated sequence. Probability frames are floored and
    /// renormalized.
    pub fn new(
        stimulus_id: impl Into<String>,
        frames: Vec<Vec<f64>>,
        mode: Mode,
    ) -> Result<Self, ParseError> {
        let dim = frames.first().map(Vec::len).ok_or(ParseError::Empty)?;
        if dim == 0 {
            return Err(ParseError::Header {
                line: 0,
                message: "dim must be positive".into(),
            });
        }
        let mut data = Vec::with_capacity(frames.len() * dim);
        for (i, frame) in frames.iter().enumerate() {
            if frame.len() != dim {
                return Err(ParseError::Arity {
                    line: i + 1,
                    expected: dim,
                    found: frame.len(),
                });
            }
            let mut frame = frame.clone();
            check_frame(&mut frame, mode, i + 1)?;
            data.extend_from_slice(&frame);
        }
        Ok(Self {
            stimulus_id: stimulus_id.into(),
            dim,
            mode,
            data,
        })
    }

    pub fn stimulus_id(&self) -> &str {
        &self.stimulus_id
    }

    pub fn set_stimulus_id(&mut self, id: impl Into<String>) {
        self.stimulus_id = id.into();
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn frame(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn frames(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    /// Returns a copy with every element multiplied by `factor`. Only
    /// meaningful in general mode.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            data: self.data.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }

    /// Serializes in the feature-file format. Values are written with
    /// round-trip precision.
    pub fn write_to<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "stimulus_id={}", self.stimulus_id)?;
        writeln!(out, "dim={}", self.dim)?;
        for frame in self.frames() {
            let row: Vec<String> = frame.iter().map(|v| format!("{v:e}")).collect();
            writeln!(out, "{}", row.join(" "))?;
        }
        Ok(())
    }

    pub fn to_feature_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("feature output is ASCII")
    }
}

fn check_frame(frame: &mut [f64], mode: Mode, line: usize) -> Result<(), ParseError> {
    if let Some(v) = frame.iter().find(|v| !v.is_finite()) {
        return Err(ParseError::Value {
            line,
            token: v.to_string(),
        });
    }
    if mode == Mode::Probability {
        if let Some(&v) = frame.iter().find(|v| **v < 0.0) {
            return Err(ParseError::NegativeProbability { line, value: v });
        }
        let sum: f64 = frame.iter().sum();
        if (sum - 1.0).abs() > PROBABILITY_SUM_TOLERANCE {
            return Err(ParseError::ProbabilitySum { line, sum });
        }
        floor_and_renormalize(frame);
    }
    Ok(())
}

/// Replaces exact zeros with [`PROBABILITY_FLOOR`] and rescales the frame to
/// sum to one.
pub fn floor_and_renormalize(frame: &mut [f64]) {
    for v in frame.iter_mut() {
        if *v == 0.0 {
            *v = PROBABILITY_FLOOR;
        }
    }
    let sum: f64 = frame.iter().sum();
    for v in frame.iter_mut() {
        *v /= sum;
    }
}

/// Parses a decimal or scientific-notation float. Rejects `inf`, `nan`,
/// hex and anything else `f64::from_str` would otherwise accept.
pub(crate) fn parse_number(token: &str) -> Option<f64> {
    let bytes = token.as_bytes();
    if bytes.is_empty() {
        return None;
    }
    let ok = bytes
        .iter()
        .all(|b| b.is_ascii_digit() || matches!(b, b'+' | b'-' | b'.' | b'e' | b'E'));
    if !ok || !bytes.iter().any(u8::is_ascii_digit) {
        return None;
    }
    token.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Parses a feature file.
pub fn read_feature_file(content: &[u8], mode: Mode) -> Result<FeatureSequence, ParseError> {
    let text = std::str::from_utf8(content).map_err(|_| ParseError::Utf8)?;
    let mut lines = text
        .split('\n')
        .enumerate()
        .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
        .peekable();

    while let Some((_, l)) = lines.peek() {
        if l.starts_with('#') {
            lines.next();
        } else {
            break;
        }
    }

    let mut stimulus_id = String::new();
    if let Some((line, l)) = lines.peek().copied() {
        if let Some(id) = l.strip_prefix("stimulus_id=") {
            if id.is_empty() {
                return Err(ParseError::Header {
                    line,
                    message: "empty stimulus_id".into(),
                });
            }
            stimulus_id = id.to_string();
            lines.next();
        }
    }

    let (line, header) = lines.next().ok_or(ParseError::Header {
        line: 1,
        message: "missing dim line".into(),
    })?;
    let dim = header
        .strip_prefix("dim=")
        .and_then(|d| d.trim().parse::<usize>().ok())
        .filter(|d| *d > 0)
        .ok_or_else(|| ParseError::Header {
            line,
            message: format!("expected `dim=<positive integer>`, found {header:?}"),
        })?;

    let mut data = Vec::new();
    for (line, l) in lines {
        if l.trim().is_empty() {
            continue;
        }
        let start = data.len();
        for token in l.split_ascii_whitespace() {
            let v = parse_number(token).ok_or_else(|| ParseError::Value {
                line,
                token: token.to_string(),
            })?;
            data.push(v);
        }
        let found = data.len() - start;
        if found != dim {
            return Err(ParseError::Arity {
                line,
                expected: dim,
                found,
            });
        }
        check_frame(&mut data[start..], mode, line)?;
    }
    if data.is_empty() {
        return Err(ParseError::Empty);
    }
    Ok(FeatureSequence {
        stimulus_id,
        dim,
        mode,
        data,
    })
}

/// Loads `<dir>/<id>.feat`-style files, checking the header id against the
/// file stem.
pub fn load_feature_file(path: &Path, mode: Mode) -> Result<FeatureSequence, ParseError> {
    let content = std::fs::read(path).map_err(|e| ParseError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut seq = read_feature_file(&content, mode)?;
    if seq.stimulus_id.is_empty() {
        seq.stimulus_id = stem;
    } else if seq.stimulus_id != stem {
        return Err(ParseError::IdMismatch {
            file: stem,
            header: seq.stimulus_id,
        });
    }
    Ok(seq)
}

/// ABX item order: two reference letters, then the probe's category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Order {
    AbA,
    BaB,
    AbB,
    BaA,
}

impl Order {
    pub const ALL: [Order; 4] = [Order::AbA, Order::BaB, Order::AbB, Order::BaA];

    pub fn as_str(self) -> &'static str {
        match self {
            Order::AbA => "AB_A",
            Order::BaB => "BA_B",
            Order::AbB => "AB_B",
            Order::BaA => "BA_A",
        }
    }

    /// The probe matches the first-presented reference for AB_A and BA_B.
    pub fn correct_position(self) -> Position {
        match self {
            Order::AbA | Order::BaB => Position::First,
            Order::AbB | Order::BaA => Position::Second,
        }
    }
}

impl fmt::Display for Order {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Order {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Order::ALL
            .into_iter()
            .find(|o| o.as_str() == s)
            .ok_or_else(|| format!("unknown order token {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Position {
    First,
    Second,
}

impl Position {
    pub fn as_str(self) -> &'static str {
        match self {
            Position::First => "first",
            Position::Second => "second",
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Position::First => Position::Second,
            Position::Second => Position::First,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Language {
    Native,
    Other,
}

impl Language {
    pub fn as_str(self) -> &'static str {
        match self {
            Language::Native => "native",
            Language::Other => "other",
        }
    }
}

impl FromStr for Language {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "native" => Ok(Language::Native),
            "other" => Ok(Language::Other),
            other => Err(format!("unknown language {other:?} (expected native|other)")),
        }
    }
}

/// One ABX item.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Trial {
    pub trial_id: String,
    pub target_id: String,
    pub other_id: String,
    pub probe_id: String,
    pub order: Order,
    pub contrast: String,
    pub context: String,
    pub language: Language,
    pub ref_speaker: String,
    pub probe_speaker: String,
}

impl Trial {
    pub fn correct_position(&self) -> Position {
        self.order.correct_position()
    }

    /// Stimulus ids in presentation order: (first reference, second reference, probe).
    pub fn presentation(&self) -> (&str, &str, &str) {
        match self.correct_position() {
            Position::First => (&self.target_id, &self.other_id, &self.probe_id),
            Position::Second => (&self.other_id, &self.target_id, &self.probe_id),
        }
    }

    /// Key identifying the contrast a trial belongs to.
    pub fn contrast_key(&self) -> (Language, &str) {
        (self.language, self.contrast.as_str())
    }

    fn validate(&self) -> Result<(), String> {
        if self.trial_id.is_empty() {
            return Err("empty trial_id".into());
        }
        if self.target_id == self.other_id {
            return Err(format!("trial {}: target equals other", self.trial_id));
        }
        if self.probe_id == self.target_id || self.probe_id == self.other_id {
            return Err(format!("trial {}: probe equals a reference", self.trial_id));
        }
        if self.ref_speaker == self.probe_speaker {
            return Err(format!(
                "trial {}: reference speaker equals probe speaker",
                self.trial_id
            ));
        }
        Ok(())
    }
}

pub const MANIFEST_COLUMNS: [&str; 10] = [
    "trial_id",
    "target_id",
    "other_id",
    "probe_id",
    "order",
    "contrast",
    "context",
    "language",
    "ref_speaker",
    "probe_speaker",
];

pub(crate) fn csv_reader(content: &[u8]) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(true)
        .from_reader(content)
}

pub(crate) fn check_columns(
    headers: &csv::StringRecord,
    expected: &[&str],
) -> Result<(), String> {
    let found: Vec<&str> = headers.iter().collect();
    if found != expected {
        return Err(format!(
            "expected columns {}, found {}",
            expected.join(","),
            found.join(",")
        ));
    }
    Ok(())
}

pub(crate) fn record_line(record: &csv::StringRecord) -> usize {
    record.position().map(|p| p.line() as usize).unwrap_or(0)
}

/// Parses a trial manifest.
pub fn read_trial_manifest(content: &[u8]) -> Result<Vec<Trial>, ParseError> {
    let mut reader = csv_reader(content);
    let headers = reader.headers().map_err(|e| ParseError::Manifest {
        line: 1,
        message: e.to_string(),
    })?;
    check_columns(headers, &MANIFEST_COLUMNS)
        .map_err(|message| ParseError::Manifest { line: 1, message })?;

    let mut seen = HashSet::new();
    let mut trials = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| ParseError::Manifest {
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record_line(&record);
        let err = |message: String| ParseError::Manifest { line, message };
        let field = |i: usize| record.get(i).unwrap_or("").to_string();
        let trial = Trial {
            trial_id: field(0),
            target_id: field(1),
            other_id: field(2),
            probe_id: field(3),
            order: field(4).parse().map_err(err)?,
            contrast: field(5),
            context: field(6),
            language: field(7).parse().map_err(err)?,
            ref_speaker: field(8),
            probe_speaker: field(9),
        };
        trial.validate().map_err(err)?;
        if !seen.insert(trial.trial_id.clone()) {
            return Err(ParseError::DuplicateTrial(trial.trial_id));
        }
        trials.push(trial);
    }
    Ok(trials)
}

/// Writes a trial manifest (header row included, no provenance line).
pub fn write_trial_manifest<W: Write>(trials: &[Trial], out: W) -> csv::Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(MANIFEST_COLUMNS)?;
    for t in trials {
        writer.write_record([
            t.trial_id.as_str(),
            &t.target_id,
            &t.other_id,
            &t.probe_id,
            t.order.as_str(),
            &t.contrast,
            &t.context,
            t.language.as_str(),
            &t.ref_speaker,
            &t.probe_speaker,
        ])?;
    }
    writer.flush()?;
    Ok(())
}
