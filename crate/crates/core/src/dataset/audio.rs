use super::DatasetError;
use crate::mfcc::Waveform;

/// Silence between the two references.
pub const AB_GAP_SECONDS: f64 = 0.5;
/// Silence between the second reference and the probe.
pub const BX_GAP_SECONDS: f64 = 0.65;

fn gap(seconds: f64, rate: u32) -> usize {
    (seconds * rate as f64).round() as usize
}

/// Concatenates first reference, silence, second reference, silence, probe.
/// Inputs are given in presentation order.
pub fn assemble_trial_audio(
    first: &Waveform,
    second: &Waveform,
    probe: &Waveform,
) -> Result<Waveform, DatasetError> {
    let rate = first.sample_rate;
    for w in [second, probe] {
        if w.sample_rate != rate {
            return Err(DatasetError::SampleRate(rate, w.sample_rate));
        }
    }
    let (ab, bx) = (gap(AB_GAP_SECONDS, rate), gap(BX_GAP_SECONDS, rate));
    let mut samples =
        Vec::with_capacity(first.samples.len() + second.samples.len() + probe.samples.len() + ab + bx);
    samples.extend_from_slice(&first.samples);
    samples.resize(samples.len() + ab, 0.0);
    samples.extend_from_slice(&second.samples);
    samples.resize(samples.len() + bx, 0.0);
    samples.extend_from_slice(&probe.samples);
    Ok(Waveform {
        samples,
        sample_rate: rate,
    })
}

/// Cuts `[start, end)` seconds out of a waveform.
pub fn cut_segment(wave: &Waveform, start: f64, end: f64) -> Result<Waveform, DatasetError> {
    let rate = wave.sample_rate as f64;
    let (s, e) = ((start * rate).round() as usize, (end * rate).round() as usize);
    if start < 0.0 || s >= e || e > wave.samples.len() {
        return Err(DatasetError::SegmentBounds { start, end });
    }
    Ok(Waveform {
        samples: wave.samples[s..e].to_vec(),
        sample_rate: wave.sample_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clip(len: usize, value: f64) -> Waveform {
        Waveform {
            samples: vec![value; len],
            sample_rate: 16000,
        }
    }

    #[test]
    fn lengths_and_silence() {
        let w = assemble_trial_audio(&clip(16000, 0.5), &clip(16000, 0.25), &clip(16000, -0.5)).unwrap();
        assert_eq!(w.samples.len(), 66400);
        assert!(w.samples[16000..24000].iter().all(|&v| v == 0.0));
        assert!(w.samples[40000..50400].iter().all(|&v| v == 0.0));
        assert_eq!(w.samples[24000], 0.25);
        assert_eq!(w.samples[50400], -0.5);
    }

    #[test]
    fn rate_mismatch() {
        let mut other = clip(10, 0.0);
        other.sample_rate = 8000;
        assert_eq!(
            assemble_trial_audio(&clip(10, 0.0), &other, &clip(10, 0.0)),
            Err(DatasetError::SampleRate(16000, 8000))
        );
    }

    #[test]
    fn cutting() {
        let w = clip(16000, 0.1);
        assert_eq!(cut_segment(&w, 0.1, 0.35).unwrap().samples.len(), 4000);
        assert!(cut_segment(&w, 0.5, 1.5).is_err());
    }
}
