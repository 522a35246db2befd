//! Fits the probit link on simulated data and prints the estimates next to
//! the generating coefficients.
//!
//! cargo run --release --example probit_fit

use abxkit::linking::{fit_probit, normal::normal_cdf};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (n, intercept, slope) = (5000, 0.5, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let delta: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
    let x = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { delta[i] });
    let y = DVector::from_fn(n, |i, _| {
        let p = normal_cdf(intercept + slope * delta[i]);
        if rng.random_bool(p) { 1.0 } else { 0.0 }
    });

    let fit = fit_probit(&x, &y)?;
    println!("converged={} after {} iterations, |score|={:.2e}", fit.converged, fit.iterations, fit.gradient_norm);
    for (name, truth, j) in [("intercept", intercept, 0), ("delta", slope, 1)] {
        println!(
            "{name:>9}: {:.4} ± {:.4} (true {truth})",
            fit.coefficients[j], fit.std_errors[j]
        );
    }
    println!("log-likelihood {:.3}", fit.log_likelihood);
    Ok(())
}
