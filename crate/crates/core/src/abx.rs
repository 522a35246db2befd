//! Per-trial discriminability, accuracy aggregation and scatter export.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use rayon::prelude::*;
use thiserror::Error;

use crate::dataset::HumanResponse;
use crate::feature_io::{
    check_columns, csv_reader, parse_number, record_line, FeatureSequence, Language, Trial,
};
use crate::metrics::{dtw_distance, DivergenceKind, MetricError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AbxError {
    #[error("trial {trial_id}: missing features for stimulus {stimulus_id}")]
    MissingStimulus {
        trial_id: String,
        stimulus_id: String,
    },
    #[error("trial {trial_id}: {source}")]
    Metric {
        trial_id: String,
        #[source]
        source: MetricError,
    },
    #[error("record references unknown trial {0}")]
    UnknownTrial(String),
    #[error("more than one record for trial {0}")]
    DuplicateRecord(String),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
}

/// Distances of the probe to both references, and their difference.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminabilityRecord {
    pub trial_id: String,
    pub d_target: f64,
    pub d_other: f64,
    pub delta: f64,
}

impl DiscriminabilityRecord {
    pub fn new(trial_id: impl Into<String>, d_target: f64, d_other: f64) -> Self {
        Self {
            trial_id: trial_id.into(),
            d_target,
            d_other,
            delta: d_other - d_target,
        }
    }

    /// Scored correct only when the probe is strictly closer to the target.
    pub fn is_correct(&self) -> bool {
        self.delta > 0.0
    }
}

pub fn score_trial(
    trial: &Trial,
    features: &HashMap<String, FeatureSequence>,
    gamma: DivergenceKind,
) -> Result<DiscriminabilityRecord, AbxError> {
    let get = |id: &str| {
        features.get(id).ok_or_else(|| AbxError::MissingStimulus {
            trial_id: trial.trial_id.clone(),
            stimulus_id: id.to_string(),
        })
    };
    let (target, other, probe) = (get(&trial.target_id)?, get(&trial.other_id)?, get(&trial.probe_id)?);
    let metric = |source| AbxError::Metric {
        trial_id: trial.trial_id.clone(),
        source,
    };
    let d_target = dtw_distance(target, probe, gamma).map_err(metric)?;
    let d_other = dtw_distance(other, probe, gamma).map_err(metric)?;
    Ok(DiscriminabilityRecord::new(&trial.trial_id, d_target, d_other))
}

/// Scores every trial in parallel. Output is sorted by trial id.
pub fn score_trials(
    trials: &[Trial],
    features: &HashMap<String, FeatureSequence>,
    gamma: DivergenceKind,
) -> Result<Vec<DiscriminabilityRecord>, AbxError> {
    let mut records = trials
        .par_iter()
        .map(|t| score_trial(t, features, gamma))
        .collect::<Result<Vec<_>, _>>()?;
    records.sort_by(|a, b| a.trial_id.cmp(&b.trial_id));
    Ok(records)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StimulusAccuracy {
    pub trial_id: String,
    pub language: Language,
    pub contrast: String,
    pub accuracy: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContrastAccuracy {
    pub language: Language,
    pub contrast: String,
    pub accuracy: f64,
    pub stimuli: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LanguageAccuracy {
    pub language: Language,
    pub accuracy: f64,
    pub contrasts: usize,
}

/// Accuracy aggregated by stimulus, then contrast, then language.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyReport {
    pub stimuli: Vec<StimulusAccuracy>,
    pub contrasts: Vec<ContrastAccuracy>,
    pub languages: Vec<LanguageAccuracy>,
    /// Mean over all contrasts regardless of language.
    pub overall: f64,
}

impl AccuracyReport {
    pub fn language(&self, language: Language) -> Option<&LanguageAccuracy> {
        self.languages.iter().find(|l| l.language == language)
    }

    pub fn contrast(&self, language: Language, contrast: &str) -> Option<&ContrastAccuracy> {
        self.contrasts
            .iter()
            .find(|c| c.language == language && c.contrast == contrast)
    }

    /// Writes `level,language,contrast,stimulus,accuracy,percent,count`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["level", "language", "contrast", "stimulus", "accuracy", "percent", "count"])?;
        let pct = |a: f64| format!("{:.1}", a * 100.0);
        for s in &self.stimuli {
            w.write_record([
                "stimulus",
                s.language.as_str(),
                &s.contrast,
                &s.trial_id,
                &s.accuracy.to_string(),
                &pct(s.accuracy),
                &s.count.to_string(),
            ])?;
        }
        for c in &self.contrasts {
            w.write_record([
                "contrast",
                c.language.as_str(),
                &c.contrast,
                "",
                &c.accuracy.to_string(),
                &pct(c.accuracy),
                &c.stimuli.to_string(),
            ])?;
        }
        for l in &self.languages {
            w.write_record([
                "language",
                l.language.as_str(),
                "",
                "",
                &l.accuracy.to_string(),
                &pct(l.accuracy),
                &l.contrasts.to_string(),
            ])?;
        }
        w.write_record([
            "overall",
            "",
            "",
            "",
            &self.overall.to_string(),
            &pct(self.overall),
            &self.contrasts.len().to_string(),
        ])?;
        w.flush()?;
        Ok(())
    }
}

fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values
        .into_iter()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

/// Three-level aggregation of per-observation values keyed by trial id.
/// `values` may hold several observations per trial.
fn aggregate(
    values: BTreeMap<&str, Vec<f64>>,
    trials: &HashMap<&str, &Trial>,
) -> AccuracyReport {
    let mut stimuli = Vec::new();
    let mut by_contrast: BTreeMap<(Language, &str), Vec<f64>> = BTreeMap::new();
    for (trial_id, obs) in values {
        let trial = trials[trial_id];
        let accuracy = mean(obs.iter().copied());
        by_contrast
            .entry(trial.contrast_key())
            .or_default()
            .push(accuracy);
        stimuli.push(StimulusAccuracy {
            trial_id: trial_id.to_string(),
            language: trial.language,
            contrast: trial.contrast.clone(),
            accuracy,
            count: obs.len(),
        });
    }
    let contrasts: Vec<ContrastAccuracy> = by_contrast
        .into_iter()
        .map(|((language, contrast), accs)| ContrastAccuracy {
            language,
            contrast: contrast.to_string(),
            accuracy: mean(accs.iter().copied()),
            stimuli: accs.len(),
        })
        .collect();
    let mut by_language: BTreeMap<Language, Vec<f64>> = BTreeMap::new();
    for c in &contrasts {
        by_language.entry(c.language).or_default().push(c.accuracy);
    }
    let languages = by_language
        .into_iter()
        .map(|(language, accs)| LanguageAccuracy {
            language,
            accuracy: mean(accs.iter().copied()),
            contrasts: accs.len(),
        })
        .collect();
    let overall = mean(contrasts.iter().map(|c| c.accuracy));
    AccuracyReport {
        stimuli,
        contrasts,
        languages,
        overall,
    }
}

fn trial_index(trials: &[Trial]) -> HashMap<&str, &Trial> {
    trials.iter().map(|t| (t.trial_id.as_str(), t)).collect()
}

/// Model accuracy: a trial is correct iff `delta > 0`.
pub fn model_accuracy(
    records: &[DiscriminabilityRecord],
    trials: &[Trial],
) -> Result<AccuracyReport, AbxError> {
    let index = trial_index(trials);
    let mut values: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in records {
        let (id, _) = index
            .get_key_value(r.trial_id.as_str())
            .ok_or_else(|| AbxError::UnknownTrial(r.trial_id.clone()))?;
        let slot = values.entry(id).or_default();
        if !slot.is_empty() {
            return Err(AbxError::DuplicateRecord(r.trial_id.clone()));
        }
        slot.push(if r.is_correct() { 1.0 } else { 0.0 });
    }
    Ok(aggregate(values, &index))
}

/// Human accuracy over non-catch responses.
pub fn human_accuracy(
    responses: &[HumanResponse],
    trials: &[Trial],
) -> Result<AccuracyReport, AbxError> {
    let index = trial_index(trials);
    let mut values: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in responses.iter().filter(|r| !r.is_catch) {
        let (id, _) = index
            .get_key_value(r.trial_id.as_str())
            .ok_or_else(|| AbxError::UnknownTrial(r.trial_id.clone()))?;
        values
            .entry(id)
            .or_default()
            .push(if r.correct { 1.0 } else { 0.0 });
    }
    Ok(aggregate(values, &index))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterRow {
    pub language: Language,
    pub contrast: String,
    pub human_accuracy: f64,
    pub mean_delta: f64,
    pub z_human: f64,
    pub z_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScatterTable {
    pub rows: Vec<ScatterRow>,
    /// Contrasts present on only one side, as `language/contrast`.
    pub skipped: Vec<String>,
}

impl ScatterTable {
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["language", "contrast", "human_accuracy", "mean_delta", "z_human", "z_delta"])?;
        for r in &self.rows {
            w.write_record([
                r.language.as_str(),
                &r.contrast,
                &r.human_accuracy.to_string(),
                &r.mean_delta.to_string(),
                &r.z_human.to_string(),
                &r.z_delta.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Population z-scores; a zero-variance column maps to zeros.
pub fn z_scores(values: &[f64]) -> Vec<f64> {
    if values.is_empty() {
        return Vec::new();
    }
    let m = mean(values.iter().copied());
    let var = mean(values.iter().map(|v| (v - m) * (v - m)));
    let sd = var.sqrt();
    if sd == 0.0 || !sd.is_finite() {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| (v - m) / sd).collect()
}

/// Per-contrast human accuracy against mean δ, each z-scored within language.
pub fn scatter_export(
    records: &[DiscriminabilityRecord],
    responses: &[HumanResponse],
    trials: &[Trial],
) -> Result<ScatterTable, AbxError> {
    let human = human_accuracy(responses, trials)?;
    let index = trial_index(trials);

    let mut deltas: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in records {
        let (id, _) = index
            .get_key_value(r.trial_id.as_str())
            .ok_or_else(|| AbxError::UnknownTrial(r.trial_id.clone()))?;
        deltas.entry(id).or_default().push(r.delta);
    }
    let model = aggregate(deltas, &index);

    let mut table = ScatterTable::default();
    let mut grouped: BTreeMap<Language, Vec<(String, f64, f64)>> = BTreeMap::new();
    for c in &model.contrasts {
        match human.contrast(c.language, &c.contrast) {
            Some(h) => grouped.entry(c.language).or_default().push((
                c.contrast.clone(),
                h.accuracy,
                c.accuracy,
            )),
            None => {
                log::warn!("contrast {} has model data but no human data", c.contrast);
                table
                    .skipped
                    .push(format!("{}/{}", c.language.as_str(), c.contrast));
            }
        }
    }
    for h in &human.contrasts {
        if model.contrast(h.language, &h.contrast).is_none() {
            table
                .skipped
                .push(format!("{}/{}", h.language.as_str(), h.contrast));
        }
    }
    for (language, rows) in grouped {
        let zh = z_scores(&rows.iter().map(|r| r.1).collect::<Vec<_>>());
        let zd = z_scores(&rows.iter().map(|r| r.2).collect::<Vec<_>>());
        for (i, (contrast, human_accuracy, mean_delta)) in rows.into_iter().enumerate() {
            table.rows.push(ScatterRow {
                language,
                contrast,
                human_accuracy,
                mean_delta,
                z_human: zh[i],
                z_delta: zd[i],
            });
        }
    }
    Ok(table)
}

pub const RECORD_COLUMNS: [&str; 4] = ["trial_id", "d_target", "d_other", "delta"];

pub fn write_records<W: Write>(records: &[DiscriminabilityRecord], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RECORD_COLUMNS)?;
    for r in records {
        w.write_record([
            r.trial_id.as_str(),
            &format!("{:e}", r.d_target),
            &format!("{:e}", r.d_other),
            &format!("{:e}", r.delta),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a records table. `delta` is recomputed from the distances and must
/// agree with the stored column.
pub fn read_records(content: &[u8]) -> Result<Vec<DiscriminabilityRecord>, AbxError> {
    let mut reader = csv_reader(content);
    let headers = reader.headers().map_err(|e| AbxError::Format {
        line: 1,
        message: e.to_string(),
    })?;
    check_columns(headers, &RECORD_COLUMNS)
        .map_err(|message| AbxError::Format { line: 1, message })?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| AbxError::Format {
            line: 0,
            message: e.to_string(),
        })?;
        let line = record_line(&record);
        let num = |i: usize| {
            record
                .get(i)
                .and_then(parse_number)
                .ok_or_else(|| AbxError::Format {
                    line,
                    message: format!("column {} is not a finite number", RECORD_COLUMNS[i]),
                })
        };
        let r = DiscriminabilityRecord::new(&record[0], num(1)?, num(2)?);
        if r.delta != num(3)? {
            return Err(AbxError::Format {
                line,
                message: "delta is not d_other - d_target".into(),
            });
        }
        out.push(r);
    }
    Ok(out)
}
