//! Mines stimulus sets from a small alignment, expands them into the four
//! ABX orders and assembles one trial's audio.
//!
//! cargo run --example build_dataset

use abxkit::dataset::{assemble_trial_audio, cut_segment, make_items, mine_stimulus_sets, parse_alignment, MiningFilter};
use abxkit::mfcc::Waveform;

const ALIGNMENT: &str = "\
utterance_id,speaker_id,phone,start,end
u1,anna,b,0.00,0.10
u1,anna,a,0.10,0.25
u1,anna,t,0.25,0.35
u2,anna,b,0.00,0.10
u2,anna,i,0.10,0.22
u2,anna,t,0.22,0.30
u3,ben,b,0.00,0.12
u3,ben,a,0.12,0.27
u3,ben,t,0.27,0.40
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let entries = parse_alignment(ALIGNMENT.as_bytes())?;
    let sets = mine_stimulus_sets(&entries, &MiningFilter::default());
    for s in &sets {
        println!("{}  contrast {} in {}", s.id(), s.contrast, s.context);
        for t in make_items(s) {
            let (first, second, probe) = t.presentation();
            println!("  {:<5} {first} | {second} | {probe}  -> answer {}", t.order.as_str(), t.correct_position().as_str());
        }
    }

    let silence = |secs: f64| Waveform {
        samples: vec![0.01; (secs * 16000.0) as usize],
        sample_rate: 16000,
    };
    let utterance = silence(0.4);
    let trial = &make_items(&sets[0])[0];
    let seg = |id: &str| {
        let s = [&sets[0].a, &sets[0].b, &sets[0].x].into_iter().find(|s| s.id == id).unwrap();
        cut_segment(&utterance, s.start, s.end)
    };
    let (first, second, probe) = trial.presentation();
    let audio = assemble_trial_audio(&seg(first)?, &seg(second)?, &seg(probe)?)?;
    println!("trial {} audio: {:.3} s", trial.trial_id, audio.duration_seconds());
    Ok(())
}
