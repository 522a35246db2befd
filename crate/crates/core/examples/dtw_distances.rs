//! DTW distances between two short sequences under both frame divergences.
//!
//! cargo run --example dtw_distances

use abxkit::metrics::{dtw_alignment, gamma_cos, gamma_kl, DivergenceKind};
use abxkit::{FeatureSequence, Mode};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("cos((1,0),(0,1)) = {}", gamma_cos(&[1.0, 0.0], &[0.0, 1.0])?);
    println!("kl((.5,.5),(.25,.75)) = {:.12}", gamma_kl(&[0.5, 0.5], &[0.25, 0.75])?);

    let c = FeatureSequence::new(
        "c",
        vec![vec![0.8, 0.1, 0.1], vec![0.1, 0.8, 0.1], vec![0.1, 0.1, 0.8]],
        Mode::Probability,
    )?;
    let d = FeatureSequence::new(
        "d",
        vec![vec![0.7, 0.2, 0.1], vec![0.2, 0.7, 0.1], vec![0.2, 0.7, 0.1], vec![0.1, 0.2, 0.7]],
        Mode::Probability,
    )?;
    for kind in [DivergenceKind::SymmetrizedKl, DivergenceKind::AngularCosine] {
        let (dist, path) = dtw_alignment(&c, &d, kind)?;
        println!("{:>6}: {dist:.6}  path {:?}", kind.as_str(), path.pairs);
    }
    Ok(())
}
