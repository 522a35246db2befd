//! Scores a handful of ABX trials from in-memory features and aggregates
//! model accuracy by contrast.
//!
//! cargo run --example score_features

use std::collections::HashMap;

use abxkit::abx::score_trials;
use abxkit::feature_io::{read_trial_manifest, Language};
use abxkit::{model_accuracy, DivergenceKind, FeatureSequence, Mode};

const MANIFEST: &str = "\
trial_id,target_id,other_id,probe_id,order,contrast,context,language,ref_speaker,probe_speaker
t1,pat,pit,pat2,AB_A,a-i,p_t,native,s1,s2
t2,pit,pat,pit2,AB_B,a-i,p_t,native,s1,s2
t3,pat,put,pat2,BA_B,a-u,p_t,native,s1,s2
";

fn seq(id: &str, vowel: [f64; 3]) -> FeatureSequence {
    let frames = vec![vec![1.0, 0.0, 0.0, 0.0], [vec![0.0], vowel.to_vec()].concat(), vec![0.0, 0.0, 0.0, 1.0]];
    FeatureSequence::new(id, frames, Mode::General).expect("valid frames")
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let trials = read_trial_manifest(MANIFEST.as_bytes())?;
    let features: HashMap<String, FeatureSequence> = [
        seq("pat", [1.0, 0.0, 0.0]),
        seq("pat2", [0.9, 0.2, 0.0]),
        seq("pit", [0.0, 1.0, 0.0]),
        seq("pit2", [0.3, 0.8, 0.0]),
        seq("put", [0.0, 0.0, 1.0]),
    ]
    .into_iter()
    .map(|s| (s.stimulus_id().to_string(), s))
    .collect();

    let records = score_trials(&trials, &features, DivergenceKind::AngularCosine)?;
    for r in &records {
        println!("{}  d_target={:.4} d_other={:.4} delta={:+.4}", r.trial_id, r.d_target, r.d_other, r.delta);
    }
    let report = model_accuracy(&records, &trials)?;
    for c in &report.contrasts {
        println!("contrast {} ({}): {:.1}%", c.contrast, c.language.as_str(), 100.0 * c.accuracy);
    }
    println!("native: {:.1}%", 100.0 * report.language(Language::Native).map_or(f64::NAN, |l| l.accuracy));
    Ok(())
}
