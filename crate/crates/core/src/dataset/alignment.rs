use std::collections::BTreeMap;

use super::DatasetError;
use crate::feature_io::{check_columns, csv_reader, parse_number, record_line};

pub const ALIGNMENT_COLUMNS: [&str; 5] = ["utterance_id", "speaker_id", "phone", "start", "end"];

/// One phone interval of a forced alignment, times in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentEntry {
    pub utterance_id: String,
    pub speaker_id: String,
    pub phone: String,
    pub start: f64,
    pub end: f64,
}

/// Parses `utterance_id,speaker_id,phone,start,end`. Output is grouped by
/// utterance (in id order) and time-sorted within each utterance.
pub fn parse_alignment(content: &[u8]) -> Result<Vec<AlignmentEntry>, DatasetError> {
    let mut reader = csv_reader(content);
    let headers = reader.headers().map_err(|e| DatasetError::Format {
        line: 1,
        message: e.to_string(),
    })?;
    check_columns(headers, &ALIGNMENT_COLUMNS)
        .map_err(|message| DatasetError::Format { line: 1, message })?;

    let mut by_utt: BTreeMap<String, Vec<(usize, AlignmentEntry)>> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| DatasetError::Format {
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record_line(&record);
        let time = |i: usize| {
            parse_number(&record[i]).ok_or_else(|| DatasetError::Format {
                line,
                message: format!("{} is not a number: {:?}", ALIGNMENT_COLUMNS[i], &record[i]),
            })
        };
        let entry = AlignmentEntry {
            utterance_id: record[0].to_string(),
            speaker_id: record[1].to_string(),
            phone: record[2].to_string(),
            start: time(3)?,
            end: time(4)?,
        };
        if entry.utterance_id.is_empty() || entry.speaker_id.is_empty() || entry.phone.is_empty() {
            return Err(DatasetError::Format {
                line,
                message: "empty utterance, speaker or phone field".into(),
            });
        }
        if entry.start < 0.0 || entry.start >= entry.end {
            return Err(DatasetError::Format {
                line,
                message: format!("need 0 <= start < end, got {}..{}", entry.start, entry.end),
            });
        }
        by_utt
            .entry(entry.utterance_id.clone())
            .or_default()
            .push((line, entry));
    }

    let mut out = Vec::new();
    for (utt, mut entries) in by_utt {
        entries.sort_by(|a, b| a.1.start.total_cmp(&b.1.start));
        for pair in entries.windows(2) {
            let ((l1, a), (l2, b)) = (&pair[0], &pair[1]);
            if b.start < a.end {
                return Err(DatasetError::Overlap {
                    utterance: utt,
                    first: (*l1).min(*l2),
                    second: (*l1).max(*l2),
                });
            }
            if a.speaker_id != b.speaker_id {
                return Err(DatasetError::Format {
                    line: *l2,
                    message: format!("utterance {utt} has more than one speaker"),
                });
            }
        }
        out.extend(entries.into_iter().map(|(_, e)| e));
    }
    Ok(out)
}
