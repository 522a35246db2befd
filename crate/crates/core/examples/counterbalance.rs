//! Splits 600 trials (200 contrasts, one stimulus set each) into lists of
//! 190 with every trial seen three times, then checks the constraints.
//!
//! cargo run --release --example counterbalance [seed]

use abxkit::dataset::{check_lists, counterbalance};
use abxkit::feature_io::{Language, Order, Trial};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = std::env::args().nth(1).map_or(Ok(0), |s| s.parse())?;
    let mut trials = Vec::new();
    for c in 0..200 {
        for k in 0..3 {
            let order = Order::ALL[(c + k) % 4];
            trials.push(Trial {
                trial_id: format!("c{c:03}-{k}"),
                target_id: format!("c{c:03}-{k}-a"),
                other_id: format!("c{c:03}-{k}-b"),
                probe_id: format!("c{c:03}-{k}-x"),
                order,
                contrast: format!("c{c:03}"),
                context: "x_y".into(),
                language: Language::Native,
                ref_speaker: "s1".into(),
                probe_speaker: "s2".into(),
            });
        }
    }
    let lists = counterbalance(&trials, 190, 3, seed)?;
    let lengths: Vec<usize> = lists.iter().map(|l| l.trial_ids.len()).collect();
    println!("{} lists, lengths {lengths:?}", lists.len());
    let report = check_lists(&lists, &trials, 190, 3);
    println!("violations: {}", report.violations.len());
    for v in &report.violations {
        println!("  {v}");
    }
    Ok(())
}
