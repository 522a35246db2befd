//! Probit linking model from δ to binarized human responses, and
//! resampled log-likelihood model comparison.

mod compare;
mod design;
pub mod normal;
mod probit;

pub use compare::{
    balanced_subsample, compare_models, percentile, resample_rng, CompareOptions, ComparisonCell,
    ComparisonMatrix, Subsample, PER_STIMULUS,
};
pub use design::{build_design, DesignMatrix};
pub use probit::{fit_probit, fit_probit_with, log_likelihood, ProbitFit, ProbitOptions};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinkError {
    #[error("unmatched response: {0}")]
    Unmatched(String),
    #[error("no usable responses")]
    Empty,
    #[error("bad design shape: {0}")]
    Shape(String),
    #[error("responses must be 0 or 1")]
    Response,
    #[error("information matrix is singular")]
    Singular,
}

/// Renders a fit as `key=value` lines.
pub fn fit_summary(names: &[String], fit: &ProbitFit) -> String {
    let mut out = String::new();
    out.push_str(&format!("log_likelihood={:e}\n", fit.log_likelihood));
    out.push_str(&format!("converged={}\n", fit.converged));
    out.push_str(&format!("iterations={}\n", fit.iterations));
    out.push_str(&format!("separation_flag={}\n", fit.separation_flag));
    out.push_str(&format!("gradient_norm={:e}\n", fit.gradient_norm));
    for (j, name) in names.iter().enumerate() {
        out.push_str(&format!("coef.{name}={:e}\n", fit.coefficients[j]));
        out.push_str(&format!("se.{name}={:e}\n", fit.std_errors[j]));
    }
    out
}
