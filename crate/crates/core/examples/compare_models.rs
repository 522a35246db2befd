//! Compares two models' δ against the same human responses with balanced
//! resampling. Uses the shipped smoke fixture's responses.
//!
//! cargo run --release --example compare_models

use abxkit::abx::DiscriminabilityRecord;
use abxkit::dataset::{ingest_responses, make_items, mine_stimulus_sets, parse_alignment};
use abxkit::linking::{compare_models, CompareOptions};
use abxkit::smoke::{mining_filter, shipped_fixture};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixture = shipped_fixture();
    let entries = parse_alignment(&std::fs::read(fixture.join("alignments.csv"))?)?;
    let trials: Vec<_> = mine_stimulus_sets(&entries, &mining_filter()).iter().flat_map(make_items).collect();
    let responses = ingest_responses(&std::fs::read(fixture.join("responses_noisy.csv"))?, &trials)?;

    // one model tracks the responses, the other is noise
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut informed = Vec::new();
    let mut random = Vec::new();
    for t in &trials {
        let hits = responses.iter().filter(|r| r.trial_id == t.trial_id && r.correct).count() as f64;
        informed.push(DiscriminabilityRecord::new(&t.trial_id, 1.0, 1.0 + hits + rng.random_range(0.0..0.5)));
        random.push(DiscriminabilityRecord::new(&t.trial_id, 1.0, rng.random_range(0.0..2.0)));
    }
    let models = vec![("informed".to_string(), informed), ("random".to_string(), random)];
    let opts = CompareOptions {
        resamples: 200,
        seed: 1,
        ..Default::default()
    };
    let matrix = compare_models(&models, &responses, &trials, &opts)?;
    println!("subsample size {}", matrix.subsample_size);
    for (m, ll) in matrix.models.iter().zip(&matrix.mean_log_likelihood) {
        println!("{m:>9}: mean LL {ll:.2}");
    }
    for c in matrix.cells.iter().filter(|c| c.row != c.col) {
        println!(
            "{} - {}: {:+.2} [{:+.2}, {:+.2}]{}",
            c.row, c.col, c.mean, c.lo, c.hi,
            if c.significant { " *" } else { "" }
        );
    }
    Ok(())
}
