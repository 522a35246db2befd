//! ABX phone-discrimination evaluation for speech representations.
//!
//! Model features are compared with dynamic time warping, turned into a
//! per-trial discriminability score δ, aggregated into accuracies and linked
//! to human responses with probit regression. The [`dataset`] module rebuilds
//! the triplet and list construction from phone alignments, and [`mfcc`]
//! provides the spectral baseline.

pub mod abx;
pub mod cli;
pub mod dataset;
pub mod feature_io;
pub mod linking;
pub mod metrics;
pub mod mfcc;
pub mod output;
pub mod smoke;

pub use abx::{model_accuracy, human_accuracy, score_trial, AccuracyReport, DiscriminabilityRecord};
pub use feature_io::{read_feature_file, read_trial_manifest, FeatureSequence, Mode, Order, Trial};
pub use metrics::{dtw_distance, gamma_cos, gamma_kl, DivergenceKind};
