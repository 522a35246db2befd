//! Benchmark construction: alignments, triplet mining, item orders, trial
//! audio, list counterbalancing and response ingestion.

mod alignment;
mod audio;
mod items;
mod lists;
mod mining;
mod responses;

pub use alignment::{parse_alignment, AlignmentEntry};
pub use audio::{assemble_trial_audio, cut_segment, AB_GAP_SECONDS, BX_GAP_SECONDS};
pub use items::make_items;
pub use lists::{
    check_lists, counterbalance, expected_list_lengths, read_lists, write_lists, ExperimentList,
    Violation, ViolationReport, SEARCH_BUDGET,
};
pub use mining::{
    mine_stimulus_sets, read_stimulus_sets, write_stimulus_sets, MiningFilter, Segment,
    StimulusSet,
};
pub use responses::{
    binarize, ingest_responses, validate_participants, write_normalized_responses, write_responses, HumanResponse, ParticipantVerdict,
    ValidationConfig,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatasetError {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("lines {first} and {second}: overlapping segments in utterance {utterance}")]
    Overlap {
        utterance: String,
        first: usize,
        second: usize,
    },
    #[error("sample rate mismatch: {0} Hz vs {1} Hz")]
    SampleRate(u32, u32),
    #[error("segment {start}..{end} s lies outside the waveform")]
    SegmentBounds { start: f64, end: f64 },
    #[error("infeasible list assignment: {0}")]
    Infeasible(String),
    #[error("line {line}: unknown trial_id {trial_id:?}")]
    UnknownTrial { line: usize, trial_id: String },
    #[error("line {line}: scale {scale} outside 1..6")]
    Scale { line: usize, scale: i64 },
    #[error("line {line}: duplicate response for participant {participant} at trial_index {index}")]
    DuplicateResponse {
        line: usize,
        participant: String,
        index: u32,
    },
}
