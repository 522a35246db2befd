use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{AudioError, Waveform};
use crate::feature_io::{FeatureSequence, Mode};

pub const SAMPLE_RATE: u32 = 16000;
pub const MFCC_DIM: usize = 13;
/// Moving normalization window: three seconds at a 10 ms hop.
pub const MVN_WINDOW_FRAMES: usize = 300;
const SD_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MfccConfig {
    pub sample_rate: u32,
    pub window_samples: usize,
    pub hop_samples: usize,
    pub fft_size: usize,
    pub num_ceps: usize,
    pub num_filters: usize,
    pub pre_emphasis: f64,
    pub low_freq: f64,
    pub high_freq: f64,
    pub energy_floor: f64,
}

impl Default for MfccConfig {
    /// 25 ms Hamming window every 10 ms at 16 kHz, 23 mel filters, 13 cepstra.
    fn default() -> Self {
        Self {
            sample_rate: SAMPLE_RATE,
            window_samples: 400,
            hop_samples: 160,
            fft_size: 512,
            num_ceps: MFCC_DIM,
            num_filters: 23,
            pre_emphasis: 0.97,
            low_freq: 20.0,
            high_freq: 8000.0,
            energy_floor: 1e-10,
        }
    }
}

impl MfccConfig {
    pub fn validate(&self) -> Result<(), AudioError> {
        let bad = |m: &str| Err(AudioError::Config(m.to_string()));
        if !(self.window_samples > self.hop_samples && self.hop_samples > 0) {
            return bad("need window > hop > 0");
        }
        if self.num_ceps == 0 || self.num_ceps > self.num_filters {
            return bad("need 0 < coefficients <= filters");
        }
        if self.fft_size < self.window_samples {
            return bad("fft size shorter than the window");
        }
        if !(0.0 <= self.low_freq && self.low_freq < self.high_freq)
            || self.high_freq > self.sample_rate as f64 / 2.0
        {
            return bad("need 0 <= low_freq < high_freq <= nyquist");
        }
        Ok(())
    }

    pub fn frame_count(&self, samples: usize) -> usize {
        if samples < self.window_samples {
            0
        } else {
            (samples - self.window_samples) / self.hop_samples + 1
        }
    }
}

pub fn hz_to_mel(hz: f64) -> f64 {
    1127.0 * (1.0 + hz / 700.0).ln()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * ((mel / 1127.0).exp() - 1.0)
}

/// Triangular filters equally spaced on the mel scale, applied to the
/// magnitude spectrum bins `0..=fft_size/2`.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    centres_hz: Vec<f64>,
    // (first bin, weights)
    filters: Vec<(usize, Vec<f64>)>,
}

impl MelFilterbank {
    pub fn new(num_filters: usize, fft_size: usize, sample_rate: u32, low: f64, high: f64) -> Self {
        let (lo, hi) = (hz_to_mel(low), hz_to_mel(high));
        let step = (hi - lo) / (num_filters + 1) as f64;
        let bin_hz = sample_rate as f64 / fft_size as f64;
        let mut centres_hz = Vec::with_capacity(num_filters);
        let mut filters = Vec::with_capacity(num_filters);
        for m in 0..num_filters {
            let (left, centre, right) = (lo + m as f64 * step, lo + (m + 1) as f64 * step, lo + (m + 2) as f64 * step);
            centres_hz.push(mel_to_hz(centre));
            let mut first = None;
            let mut weights = Vec::new();
            for k in 0..=fft_size / 2 {
                let mel = hz_to_mel(k as f64 * bin_hz);
                let w = if mel > left && mel <= centre {
                    (mel - left) / (centre - left)
                } else if mel > centre && mel < right {
                    (right - mel) / (right - centre)
                } else {
                    0.0
                };
                if w > 0.0 {
                    first.get_or_insert(k);
                    weights.push(w);
                } else if first.is_some() {
                    break;
                }
            }
            filters.push((first.unwrap_or(0), weights));
        }
        Self { centres_hz, filters }
    }

    pub fn centres_hz(&self) -> &[f64] {
        &self.centres_hz
    }

    pub fn len(&self) -> usize {
        self.filters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filters.is_empty()
    }

    pub fn apply(&self, spectrum: &[f64]) -> Vec<f64> {
        self.filters
            .iter()
            .map(|(first, w)| w.iter().zip(&spectrum[*first..]).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Reusable MFCC front end: FFT plan, window and filterbank.
pub struct MfccExtractor {
    config: MfccConfig,
    window: Vec<f64>,
    filterbank: MelFilterbank,
    fft: Arc<dyn Fft<f64>>,
    dct: Vec<Vec<f64>>,
}

impl MfccExtractor {
    pub fn new(config: MfccConfig) -> Result<Self, AudioError> {
        config.validate()?;
        let n = config.window_samples;
        let window = (0..n)
            .map(|i| 0.54 - 0.46 * (2.0 * PI * i as f64 / (n - 1) as f64).cos())
            .collect();
        let filterbank = MelFilterbank::new(
            config.num_filters,
            config.fft_size,
            config.sample_rate,
            config.low_freq,
            config.high_freq,
        );
        let fft = FftPlanner::new().plan_fft_forward(config.fft_size);
        // orthonormal DCT-II rows
        let m = config.num_filters;
        let dct = (0..config.num_ceps)
            .map(|k| {
                let scale = if k == 0 { (1.0 / m as f64).sqrt() } else { (2.0 / m as f64).sqrt() };
                (0..m)
                    .map(|j| scale * (PI * k as f64 * (2 * j + 1) as f64 / (2 * m) as f64).cos())
                    .collect()
            })
            .collect();
        Ok(Self {
            config,
            window,
            filterbank,
            fft,
            dct,
        })
    }

    pub fn config(&self) -> &MfccConfig {
        &self.config
    }

    pub fn filterbank(&self) -> &MelFilterbank {
        &self.filterbank
    }

    fn check(&self, w: &Waveform) -> Result<(), AudioError> {
        if w.sample_rate != self.config.sample_rate {
            return Err(AudioError::SampleRate {
                found: w.sample_rate,
                expected: self.config.sample_rate,
            });
        }
        if w.samples.len() < self.config.window_samples {
            return Err(AudioError::TooShort {
                samples: w.samples.len(),
                window: self.config.window_samples,
            });
        }
        Ok(())
    }

    /// Log mel-filterbank energies, one row per frame.
    pub fn log_mel_energies(&self, w: &Waveform) -> Result<Vec<Vec<f64>>, AudioError> {
        self.check(w)?;
        let cfg = &self.config;
        let n = cfg.window_samples;
        let mut buf = vec![Complex::new(0.0, 0.0); cfg.fft_size];
        let mut frame = vec![0.0; n];
        let mut spectrum = vec![0.0; cfg.fft_size / 2 + 1];
        let mut out = Vec::with_capacity(cfg.frame_count(w.samples.len()));
        for f in 0..cfg.frame_count(w.samples.len()) {
            frame.copy_from_slice(&w.samples[f * cfg.hop_samples..f * cfg.hop_samples + n]);
            for i in (1..n).rev() {
                frame[i] -= cfg.pre_emphasis * frame[i - 1];
            }
            frame[0] -= cfg.pre_emphasis * frame[0];
            for (b, (x, win)) in buf.iter_mut().zip(frame.iter().zip(&self.window)) {
                *b = Complex::new(x * win, 0.0);
            }
            for b in buf[n..].iter_mut() {
                *b = Complex::new(0.0, 0.0);
            }
            self.fft.process(&mut buf);
            for (s, b) in spectrum.iter_mut().zip(&buf) {
                *s = b.norm();
            }
            out.push(
                self.filterbank
                    .apply(&spectrum)
                    .into_iter()
                    .map(|e| e.max(cfg.energy_floor).ln())
                    .collect(),
            );
        }
        Ok(out)
    }

    pub fn extract(&self, w: &Waveform) -> Result<FeatureSequence, AudioError> {
        let frames = self
            .log_mel_energies(w)?
            .into_iter()
            .map(|e| self.dct.iter().map(|row| row.iter().zip(&e).map(|(a, b)| a * b).sum()).collect())
            .collect();
        FeatureSequence::new("", frames, Mode::General).map_err(|e| AudioError::Config(e.to_string()))
    }
}

/// Cepstral coefficients per frame (13 by default).
pub fn extract_mfcc(w: &Waveform, config: &MfccConfig) -> Result<FeatureSequence, AudioError> {
    MfccExtractor::new(*config)?.extract(w)
}

fn regression_deltas(frames: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = frames.len() as isize;
    let dim = frames[0].len();
    let at = |t: isize| &frames[t.clamp(0, n - 1) as usize];
    (0..n)
        .map(|t| {
            (0..dim)
                .map(|d| {
                    let num: f64 = (1..=2).map(|k| k as f64 * (at(t + k)[d] - at(t - k)[d])).sum();
                    num / 10.0
                })
                .collect()
        })
        .collect()
}

/// Appends first and second derivatives (±2-frame regression, edge frames
/// replicated), 13 → 39 dimensions.
pub fn add_deltas(seq: &FeatureSequence) -> Result<FeatureSequence, AudioError> {
    if seq.dim() != MFCC_DIM {
        return Err(AudioError::Dimension {
            found: seq.dim(),
            expected: MFCC_DIM,
        });
    }
    let base: Vec<Vec<f64>> = seq.frames().map(<[f64]>::to_vec).collect();
    let delta = regression_deltas(&base);
    let delta2 = regression_deltas(&delta);
    let frames = base
        .into_iter()
        .zip(delta)
        .zip(delta2)
        .map(|((mut b, d), dd)| {
            b.extend(d);
            b.extend(dd);
            b
        })
        .collect();
    let mut out = FeatureSequence::new(seq.stimulus_id(), frames, Mode::General)
        .map_err(|e| AudioError::Config(e.to_string()))?;
    out.set_stimulus_id(seq.stimulus_id());
    Ok(out)
}

/// Normalizes each frame by the mean and population SD of the centred
/// `window`-frame neighbourhood, truncated at the edges.
pub fn moving_mvn(seq: &FeatureSequence, window: usize) -> FeatureSequence {
    let n = seq.len();
    let dim = seq.dim();
    let half = window / 2;
    let frames = (0..n)
        .map(|t| {
            let lo = t.saturating_sub(half);
            let hi = (t + window - half).min(n);
            let count = (hi - lo) as f64;
            (0..dim)
                .map(|d| {
                    // shifted by the first value so constant runs are exact
                    let origin = seq.frame(lo)[d];
                    let shift: f64 = (lo..hi).map(|i| seq.frame(i)[d] - origin).sum::<f64>() / count;
                    let var: f64 = (lo..hi)
                        .map(|i| {
                            let v = seq.frame(i)[d] - origin - shift;
                            v * v
                        })
                        .sum::<f64>()
                        / count;
                    (seq.frame(t)[d] - origin - shift) / var.sqrt().max(SD_FLOOR)
                })
                .collect()
        })
        .collect();
    FeatureSequence::new(seq.stimulus_id(), frames, Mode::General).expect("normalized frames are finite")
}

/// Baseline features: MFCC, deltas, then moving mean-variance normalization.
pub fn baseline_features(w: &Waveform, config: &MfccConfig) -> Result<FeatureSequence, AudioError> {
    let mfcc = extract_mfcc(w, config)?;
    Ok(moving_mvn(&add_deltas(&mfcc)?, MVN_WINDOW_FRAMES))
}
