//! Baseline spectral features: WAV decoding and MFCC with derivatives and
//! moving mean-variance normalization.

mod features;
mod wav;

pub use features::{
    add_deltas, baseline_features, extract_mfcc, hz_to_mel, mel_to_hz, moving_mvn, MelFilterbank,
    MfccConfig, MfccExtractor, MFCC_DIM, MVN_WINDOW_FRAMES, SAMPLE_RATE,
};
pub use wav::{read_wav, wav_bytes, write_wav, Waveform};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AudioError {
    #[error("not a RIFF/WAVE file")]
    NotWave,
    #[error("truncated chunk")]
    Truncated,
    #[error("missing fmt chunk")]
    MissingFormat,
    #[error("missing data chunk")]
    MissingData,
    #[error("unsupported format tag {0} (only PCM is supported)")]
    NotPcm(u16),
    #[error("expected mono audio, found {0} channels")]
    Channels(u16),
    #[error("expected 16-bit samples, found {0}-bit")]
    BitDepth(u16),
    #[error("sample rate {found} Hz, expected {expected} Hz (no resampling is done)")]
    SampleRate { found: u32, expected: u32 },
    #[error("input has {samples} samples, shorter than one {window}-sample window")]
    TooShort { samples: usize, window: usize },
    #[error("feature dimension {found}, expected {expected}")]
    Dimension { found: usize, expected: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
}
