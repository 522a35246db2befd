//! MFCC baseline on a synthetic chirp: 13 cepstra, deltas, moving MVN.
//!
//! cargo run --example mfcc_pipeline [file.wav]

use abxkit::mfcc::{add_deltas, extract_mfcc, moving_mvn, read_wav, MfccConfig, Waveform, MVN_WINDOW_FRAMES};

fn chirp(seconds: f64) -> Waveform {
    let rate = 16000.0;
    let n = (seconds * rate) as usize;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / rate;
            0.4 * (2.0 * std::f64::consts::PI * (200.0 * t + 1500.0 * t * t)).sin()
        })
        .collect();
    Waveform {
        samples,
        sample_rate: 16000,
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let wave = match std::env::args().nth(1) {
        Some(path) => read_wav(&std::fs::read(path)?)?,
        None => chirp(1.0),
    };
    let cfg = MfccConfig::default();
    let mfcc = extract_mfcc(&wave, &cfg)?;
    let full = moving_mvn(&add_deltas(&mfcc)?, MVN_WINDOW_FRAMES);
    println!("{} samples -> {} frames x {} dims", wave.samples.len(), full.len(), full.dim());
    for i in [0, full.len() / 2, full.len() - 1] {
        let head: Vec<String> = full.frame(i)[..6].iter().map(|v| format!("{v:+.3}")).collect();
        println!("frame {i:>3}: {} ...", head.join(" "));
    }
    Ok(())
}
