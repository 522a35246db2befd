use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use rayon::prelude::*;

use super::{AlignmentEntry, DatasetError};
use crate::feature_io::{check_columns, csv_reader, parse_number, record_line, Language};

/// A three-phone window cut from one utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    /// `<utterance>-w<index of first phone>`
    pub id: String,
    pub utterance_id: String,
    pub speaker_id: String,
    pub phones: [String; 3],
    pub start: f64,
    pub end: f64,
}

impl Segment {
    pub fn centre(&self) -> &str {
        &self.phones[1]
    }

    pub fn context(&self) -> String {
        format!("{}_{}", self.phones[0], self.phones[2])
    }
}

/// Two same-speaker references differing only in the centre phone, and a
/// probe from another speaker matching one of them.
#[derive(Debug, Clone, PartialEq)]
pub struct StimulusSet {
    pub a: Segment,
    pub b: Segment,
    pub x: Segment,
    pub contrast: String,
    pub context: String,
    pub language: Language,
}

impl StimulusSet {
    pub fn id(&self) -> String {
        format!("{}+{}+{}", self.a.id, self.b.id, self.x.id)
    }

    pub fn x_matches_a(&self) -> bool {
        self.x.phones == self.a.phones
    }

    pub fn is_valid(&self) -> bool {
        self.a.speaker_id == self.b.speaker_id
            && self.a.speaker_id != self.x.speaker_id
            && self.a.phones[0] == self.b.phones[0]
            && self.a.phones[2] == self.b.phones[2]
            && self.a.centre() != self.b.centre()
            && (self.x.phones == self.a.phones || self.x.phones == self.b.phones)
    }
}

#[derive(Debug, Clone, Default)]
pub struct MiningFilter {
    /// When set, both centre phones must be in this set.
    pub allowed_centres: Option<BTreeSet<String>>,
    /// Context labels (`left_right`) to skip.
    pub excluded_contexts: BTreeSet<String>,
    pub language: Option<Language>,
}

fn windows(entries: &[AlignmentEntry]) -> Vec<Segment> {
    let mut by_utt: BTreeMap<&str, Vec<&AlignmentEntry>> = BTreeMap::new();
    for e in entries {
        by_utt.entry(&e.utterance_id).or_default().push(e);
    }
    by_utt
        .into_par_iter()
        .flat_map_iter(|(utt, mut es)| {
            es.sort_by(|a, b| a.start.total_cmp(&b.start));
            es.windows(3)
                .enumerate()
                .map(|(k, w)| Segment {
                    id: format!("{utt}-w{k}"),
                    utterance_id: utt.to_string(),
                    speaker_id: w[0].speaker_id.clone(),
                    phones: [w[0].phone.clone(), w[1].phone.clone(), w[2].phone.clone()],
                    start: w[0].start,
                    end: w[2].end,
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Enumerates every stimulus set in the alignments. References are ordered
/// so that `a` carries the lexicographically smaller centre phone.
pub fn mine_stimulus_sets(entries: &[AlignmentEntry], filter: &MiningFilter) -> Vec<StimulusSet> {
    let language = filter.language.unwrap_or(Language::Native);
    let segments = windows(entries);
    let allowed = |p: &str| {
        filter
            .allowed_centres
            .as_ref()
            .is_none_or(|set| set.contains(p))
    };

    // (speaker, left, right) -> segments
    let mut by_frame: BTreeMap<(&str, &str, &str), Vec<&Segment>> = BTreeMap::new();
    // phone string -> segments
    let mut by_phones: BTreeMap<&[String; 3], Vec<&Segment>> = BTreeMap::new();
    for s in &segments {
        by_frame
            .entry((&s.speaker_id, &s.phones[0], &s.phones[2]))
            .or_default()
            .push(s);
        by_phones.entry(&s.phones).or_default().push(s);
    }

    let mut sets = Vec::new();
    for group in by_frame.values() {
        for a in group {
            for b in group {
                if a.centre() >= b.centre() || !allowed(a.centre()) || !allowed(b.centre()) {
                    continue;
                }
                let context = a.context();
                if filter.excluded_contexts.contains(&context) {
                    continue;
                }
                let contrast = format!("{}-{}", a.centre(), b.centre());
                for phones in [&a.phones, &b.phones] {
                    for x in by_phones.get(phones).into_iter().flatten() {
                        if x.speaker_id == a.speaker_id {
                            continue;
                        }
                        sets.push(StimulusSet {
                            a: (*a).clone(),
                            b: (*b).clone(),
                            x: (*x).clone(),
                            contrast: contrast.clone(),
                            context: context.clone(),
                            language,
                        });
                    }
                }
            }
        }
    }
    sets.sort_by(|p, q| {
        (&p.contrast, &p.context, &p.a.speaker_id, &p.x.speaker_id, &p.a.id, &p.b.id, &p.x.id).cmp(&(
            &q.contrast,
            &q.context,
            &q.a.speaker_id,
            &q.x.speaker_id,
            &q.a.id,
            &q.b.id,
            &q.x.id,
        ))
    });
    sets
}

const SET_COLUMNS: [&str; 22] = [
    "set_id", "contrast", "context", "language",
    "a_id", "a_utterance", "a_speaker", "a_phones", "a_start", "a_end",
    "b_id", "b_utterance", "b_speaker", "b_phones", "b_start", "b_end",
    "x_id", "x_utterance", "x_speaker", "x_phones", "x_start", "x_end",
];

/// Writes stimulus sets as a comma-separated table; phones are space-joined.
pub fn write_stimulus_sets<W: Write>(sets: &[StimulusSet], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SET_COLUMNS)?;
    for s in sets {
        let mut row = vec![
            s.id(),
            s.contrast.clone(),
            s.context.clone(),
            s.language.as_str().to_string(),
        ];
        for seg in [&s.a, &s.b, &s.x] {
            row.extend([
                seg.id.clone(),
                seg.utterance_id.clone(),
                seg.speaker_id.clone(),
                seg.phones.join(" "),
                format!("{:e}", seg.start),
                format!("{:e}", seg.end),
            ]);
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_stimulus_sets(content: &[u8]) -> Result<Vec<StimulusSet>, DatasetError> {
    let mut reader = csv_reader(content);
    let headers = reader.headers().map_err(|e| DatasetError::Format {
        line: 1,
        message: e.to_string(),
    })?;
    check_columns(headers, &SET_COLUMNS)
        .map_err(|message| DatasetError::Format { line: 1, message })?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| DatasetError::Format {
            line: 0,
            message: e.to_string(),
        })?;
        let line = record_line(&record);
        let err = |message: String| DatasetError::Format { line, message };
        let segment = |base: usize| -> Result<Segment, DatasetError> {
            let phones: Vec<&str> = record[base + 3].split(' ').collect();
            let phones: [String; 3] = match phones.as_slice() {
                [l, c, r] => [l.to_string(), c.to_string(), r.to_string()],
                _ => return Err(err(format!("expected three phones, found {:?}", &record[base + 3]))),
            };
            let num = |i: usize| {
                parse_number(&record[base + i]).ok_or_else(|| err(format!("bad time {:?}", &record[base + i])))
            };
            Ok(Segment {
                id: record[base].to_string(),
                utterance_id: record[base + 1].to_string(),
                speaker_id: record[base + 2].to_string(),
                phones,
                start: num(4)?,
                end: num(5)?,
            })
        };
        let set = StimulusSet {
            a: segment(4)?,
            b: segment(10)?,
            x: segment(16)?,
            contrast: record[1].to_string(),
            context: record[2].to_string(),
            language: record[3].parse().map_err(err)?,
        };
        if !set.is_valid() {
            return Err(err(format!("set {} violates the stimulus-set invariants", &record[0])));
        }
        out.push(set);
    }
    Ok(out)
}
