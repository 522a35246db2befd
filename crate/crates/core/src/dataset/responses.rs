use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Write;

use super::DatasetError;
use crate::feature_io::{check_columns, csv_reader, record_line, Position, Trial};

pub const RESPONSE_COLUMNS: [&str; 6] =
    ["participant_id", "list_id", "trial_index", "trial_id", "scale", "is_catch"];

/// Columns appended by [`write_normalized_responses`]; accepted on input and
/// checked against the values derived from the scale.
pub const DERIVED_COLUMNS: [&str; 2] = ["choice", "correct"];

/// One participant answer on the six-point scale, binarized.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HumanResponse {
    pub participant_id: String,
    pub list_id: String,
    /// 1-based position in the participant's list.
    pub trial_index: u32,
    pub trial_id: String,
    pub scale: u8,
    pub is_catch: bool,
    pub choice: Position,
    pub correct: bool,
}

impl HumanResponse {
    /// Scale values 1..=3 choose the first reference, 4..=6 the second.
    pub fn new(
        participant_id: impl Into<String>,
        list_id: impl Into<String>,
        trial_index: u32,
        trial: &Trial,
        scale: u8,
        is_catch: bool,
    ) -> Option<Self> {
        let choice = binarize(scale)?;
        Some(Self {
            participant_id: participant_id.into(),
            list_id: list_id.into(),
            trial_index,
            trial_id: trial.trial_id.clone(),
            scale,
            is_catch,
            choice,
            correct: choice == trial.correct_position(),
        })
    }
}

pub fn binarize(scale: u8) -> Option<Position> {
    match scale {
        1..=3 => Some(Position::First),
        4..=6 => Some(Position::Second),
        _ => None,
    }
}

fn parse_flag(s: &str) -> Option<bool> {
    match s {
        "0" | "false" => Some(false),
        "1" | "true" => Some(true),
        _ => None,
    }
}

/// Parses `participant_id,list_id,trial_index,trial_id,scale,is_catch`,
/// optionally followed by `choice,correct`. Catch items must appear in the
/// trial manifest like any other item.
pub fn ingest_responses(content: &[u8], trials: &[Trial]) -> Result<Vec<HumanResponse>, DatasetError> {
    let index: HashMap<&str, &Trial> = trials.iter().map(|t| (t.trial_id.as_str(), t)).collect();
    let mut reader = csv_reader(content);
    let headers = reader.headers().map_err(|e| DatasetError::Format {
        line: 1,
        message: e.to_string(),
    })?;
    let derived = headers.len() == RESPONSE_COLUMNS.len() + DERIVED_COLUMNS.len();
    let expected: Vec<&str> = if derived {
        RESPONSE_COLUMNS.iter().chain(&DERIVED_COLUMNS).copied().collect()
    } else {
        RESPONSE_COLUMNS.to_vec()
    };
    check_columns(headers, &expected).map_err(|message| DatasetError::Format { line: 1, message })?;

    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| DatasetError::Format {
            line: 0,
            message: e.to_string(),
        })?;
        let line = record_line(&record);
        let format = |message: String| DatasetError::Format { line, message };
        let trial_index: u32 = record[2]
            .parse()
            .ok()
            .filter(|&i| i >= 1)
            .ok_or_else(|| format(format!("trial_index must be a positive integer, got {:?}", &record[2])))?;
        let scale: i64 = record[4]
            .parse()
            .map_err(|_| format(format!("scale is not an integer: {:?}", &record[4])))?;
        if !(1..=6).contains(&scale) {
            return Err(DatasetError::Scale { line, scale });
        }
        let is_catch = parse_flag(&record[5])
            .ok_or_else(|| format(format!("is_catch must be 0/1/true/false, got {:?}", &record[5])))?;
        let trial = index.get(&record[3]).ok_or_else(|| DatasetError::UnknownTrial {
            line,
            trial_id: record[3].to_string(),
        })?;
        let participant = record[0].to_string();
        if !seen.insert((participant.clone(), trial_index)) {
            return Err(DatasetError::DuplicateResponse {
                line,
                participant,
                index: trial_index,
            });
        }
        let response = HumanResponse::new(participant, &record[1], trial_index, trial, scale as u8, is_catch)
            .expect("scale checked above");
        if derived {
            let correct = parse_flag(&record[7]);
            if record[6] != *response.choice.as_str() || correct != Some(response.correct) {
                return Err(format(format!(
                    "choice,correct = {},{} disagree with scale {scale} (expected {},{})",
                    &record[6],
                    &record[7],
                    response.choice.as_str(),
                    u8::from(response.correct)
                )));
            }
        }
        out.push(response);
    }
    Ok(out)
}

pub fn write_responses<W: Write>(responses: &[HumanResponse], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESPONSE_COLUMNS)?;
    for r in responses {
        w.write_record([
            r.participant_id.as_str(),
            &r.list_id,
            &r.trial_index.to_string(),
            &r.trial_id,
            &r.scale.to_string(),
            if r.is_catch { "1" } else { "0" },
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Raw columns plus the binarized choice and derived correctness.
pub fn write_normalized_responses<W: Write>(responses: &[HumanResponse], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESPONSE_COLUMNS.iter().chain(&DERIVED_COLUMNS))?;
    for r in responses {
        w.write_record([
            r.participant_id.as_str(),
            &r.list_id,
            &r.trial_index.to_string(),
            &r.trial_id,
            &r.scale.to_string(),
            if r.is_catch { "1" } else { "0" },
            r.choice.as_str(),
            if r.correct { "1" } else { "0" },
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValidationConfig {
    pub catch_total: usize,
    pub fail_threshold: usize,
    /// Non-catch trials a participant must answer to count as finished.
    pub expected_trials: usize,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            catch_total: 12,
            fail_threshold: 3,
            expected_trials: 190,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParticipantVerdict {
    pub participant_id: String,
    pub accepted: bool,
    pub catch_failures: usize,
    pub catch_answered: usize,
    pub answered: usize,
    pub reasons: Vec<String>,
}

/// Rejects participants with too many failed catch trials or an unfinished
/// session. Output is sorted by participant id.
pub fn validate_participants(responses: &[HumanResponse], config: ValidationConfig) -> Vec<ParticipantVerdict> {
    let mut by_participant: BTreeMap<&str, Vec<&HumanResponse>> = BTreeMap::new();
    for r in responses {
        by_participant.entry(&r.participant_id).or_default().push(r);
    }
    by_participant
        .into_iter()
        .map(|(id, rs)| {
            let catch_answered = rs.iter().filter(|r| r.is_catch).count();
            let catch_failures = rs.iter().filter(|r| r.is_catch && !r.correct).count();
            let answered = rs.len() - catch_answered;
            let mut reasons = Vec::new();
            if catch_failures >= config.fail_threshold {
                reasons.push(format!(
                    "failed {catch_failures} of {} catch trials (threshold {})",
                    config.catch_total, config.fail_threshold
                ));
            }
            if answered < config.expected_trials || catch_answered < config.catch_total {
                reasons.push(format!(
                    "did not finish: answered {answered}/{} trials and {catch_answered}/{} catch trials",
                    config.expected_trials, config.catch_total
                ));
            }
            ParticipantVerdict {
                participant_id: id.to_string(),
                accepted: reasons.is_empty(),
                catch_failures,
                catch_answered,
                answered,
                reasons,
            }
        })
        .collect()
}
