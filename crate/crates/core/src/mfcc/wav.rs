//! Minimal RIFF/WAVE reader and writer for 16-bit PCM mono audio.

use std::io::Write;

use super::AudioError;

/// Mono audio with samples in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

/// Decodes a 16-bit PCM mono WAV file. Samples are scaled by 1/32768.
pub fn read_wav(bytes: &[u8]) -> Result<Waveform, AudioError> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(AudioError::NotWave);
    }
    let mut pos = 12;
    let mut format: Option<(u16, u16, u32, u16)> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body = pos + 8;
        let end = body.checked_add(size).ok_or(AudioError::Truncated)?;
        if end > bytes.len() {
            return Err(AudioError::Truncated);
        }
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(AudioError::Truncated);
                }
                format = Some((
                    u16_at(bytes, body),
                    u16_at(bytes, body + 2),
                    u32_at(bytes, body + 4),
                    u16_at(bytes, body + 14),
                ));
            }
            b"data" => {
                let (tag, channels, rate, bits) = format.ok_or(AudioError::MissingFormat)?;
                if tag != 1 {
                    return Err(AudioError::NotPcm(tag));
                }
                if channels != 1 {
                    return Err(AudioError::Channels(channels));
                }
                if bits != 16 {
                    return Err(AudioError::BitDepth(bits));
                }
                if !size.is_multiple_of(2) {
                    return Err(AudioError::Truncated);
                }
                let samples = bytes[body..end]
                    .chunks_exact(2)
                    .map(|c| i16::from_le_bytes([c[0], c[1]]) as f64 / 32768.0)
                    .collect();
                return Ok(Waveform {
                    samples,
                    sample_rate: rate,
                });
            }
            _ => {}
        }
        // chunks are word aligned
        pos = end + (size & 1);
    }
    Err(if format.is_some() {
        AudioError::MissingData
    } else {
        AudioError::MissingFormat
    })
}

/// Encodes as 16-bit PCM mono. Samples are clamped to `[-1, 1)` and rounded.
pub fn write_wav<W: Write>(wave: &Waveform, mut out: W) -> std::io::Result<()> {
    let data_len = (wave.samples.len() * 2) as u32;
    out.write_all(b"RIFF")?;
    out.write_all(&(36 + data_len).to_le_bytes())?;
    out.write_all(b"WAVEfmt ")?;
    out.write_all(&16u32.to_le_bytes())?;
    out.write_all(&1u16.to_le_bytes())?;
    out.write_all(&1u16.to_le_bytes())?;
    out.write_all(&wave.sample_rate.to_le_bytes())?;
    out.write_all(&(wave.sample_rate * 2).to_le_bytes())?;
    out.write_all(&2u16.to_le_bytes())?;
    out.write_all(&16u16.to_le_bytes())?;
    out.write_all(b"data")?;
    out.write_all(&data_len.to_le_bytes())?;
    let mut buf = Vec::with_capacity(data_len as usize);
    for &s in &wave.samples {
        let v = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf)
}

pub fn wav_bytes(wave: &Waveform) -> Vec<u8> {
    let mut buf = Vec::new();
    write_wav(wave, &mut buf).expect("writing to a Vec cannot fail");
    buf
}
