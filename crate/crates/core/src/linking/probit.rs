use nalgebra::{DMatrix, DVector};

use super::normal::{inverse_mills, log_normal_cdf, normal_cdf};
use super::LinkError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbitOptions {
    pub max_iterations: usize,
    pub step_tolerance: f64,
    pub gradient_tolerance: f64,
    /// Coefficient magnitude that triggers the separation fallback.
    pub separation_bound: f64,
    /// L2 penalty on non-intercept coefficients in the fallback fit.
    pub ridge: f64,
}

impl Default for ProbitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            step_tolerance: 1e-10,
            gradient_tolerance: 1e-8,
            separation_bound: 15.0,
            ridge: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbitFit {
    pub coefficients: DVector<f64>,
    pub std_errors: DVector<f64>,
    pub log_likelihood: f64,
    pub converged: bool,
    pub iterations: usize,
    pub separation_flag: bool,
    /// Max-norm of the (penalized) score at the returned coefficients.
    pub gradient_norm: f64,
}

/// Probit log-likelihood `Σ log Φ(q_i x_iᵀβ)` with `q_i = 2y_i − 1`.
pub fn log_likelihood(x: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>) -> f64 {
    let eta = x * beta;
    eta.iter()
        .zip(y.iter())
        .map(|(&e, &yi)| log_normal_cdf(if yi > 0.5 { e } else { -e }))
        .sum()
}

struct Newton<'a> {
    x: &'a DMatrix<f64>,
    y: &'a DVector<f64>,
    penalty: DVector<f64>,
}

struct State {
    objective: f64,
    gradient: DVector<f64>,
    neg_hessian: DMatrix<f64>,
}

impl Newton<'_> {
    fn objective(&self, beta: &DVector<f64>) -> f64 {
        log_likelihood(self.x, self.y, beta) - 0.5 * beta.component_mul(beta).dot(&self.penalty)
    }

    fn state(&self, beta: &DVector<f64>) -> State {
        let eta = self.x * beta;
        let n = eta.len();
        let mut score = DVector::zeros(n);
        let mut weight = DVector::zeros(n);
        for i in 0..n {
            let q = if self.y[i] > 0.5 { 1.0 } else { -1.0 };
            let lambda = q * inverse_mills(q * eta[i]);
            score[i] = lambda;
            // -d²ℓ/dη² = λ(λ + η)
            weight[i] = (lambda * (lambda + eta[i])).max(0.0);
        }
        let gradient = self.x.transpose() * score - self.penalty.component_mul(beta);
        let weighted = DMatrix::from_fn(n, self.x.ncols(), |i, j| self.x[(i, j)] * weight[i]);
        let mut neg_hessian = self.x.transpose() * weighted;
        for j in 0..self.penalty.len() {
            neg_hessian[(j, j)] += self.penalty[j];
        }
        State {
            objective: self.objective(beta),
            gradient,
            neg_hessian,
        }
    }
}

enum Outcome {
    Done {
        beta: DVector<f64>,
        converged: bool,
        iterations: usize,
    },
    Diverging,
}

fn newton(problem: &Newton<'_>, opts: &ProbitOptions, watch_bound: bool) -> Result<Outcome, LinkError> {
    let p = problem.x.ncols();
    let mut beta = DVector::zeros(p);
    let mut state = problem.state(&beta);
    for iteration in 1..=opts.max_iterations {
        if state.gradient.amax() < opts.gradient_tolerance {
            return Ok(Outcome::Done {
                beta,
                converged: true,
                iterations: iteration - 1,
            });
        }
        let step = state
            .neg_hessian
            .clone()
            .cholesky()
            .map(|c| c.solve(&state.gradient))
            .or_else(|| state.neg_hessian.clone().lu().solve(&state.gradient))
            .ok_or(LinkError::Singular)?;
        // step halving keeps the concave objective monotone, up to rounding
        let floor = state.objective - 64.0 * f64::EPSILON * state.objective.abs().max(1.0);
        let mut scale = 1.0;
        let mut candidate = &beta + &step;
        let mut objective = problem.objective(&candidate);
        while objective < floor && scale > 1e-6 {
            scale *= 0.5;
            candidate = &beta + &step * scale;
            objective = problem.objective(&candidate);
        }
        beta = candidate;
        if watch_bound && beta.amax() > opts.separation_bound {
            return Ok(Outcome::Diverging);
        }
        state = problem.state(&beta);
        if (&step * scale).amax() < opts.step_tolerance {
            return Ok(Outcome::Done {
                converged: state.gradient.amax() < opts.gradient_tolerance,
                beta,
                iterations: iteration,
            });
        }
    }
    let converged = state.gradient.amax() < opts.gradient_tolerance;
    Ok(Outcome::Done {
        beta,
        converged,
        iterations: opts.max_iterations,
    })
}

fn is_intercept(x: &DMatrix<f64>, j: usize) -> bool {
    x.column(j).iter().all(|&v| v == 1.0)
}

/// Maximum-likelihood probit fit by Newton-Raphson (iteratively reweighted
/// least squares with the observed information).
///
/// If a coefficient exceeds the separation bound, the outcome is constant,
/// or every observation ends up predicted with probability above 1 − 1e-6,
/// the fit restarts with a small ridge penalty on the non-intercept
/// coefficients and sets `separation_flag`.
pub fn fit_probit_with(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    opts: &ProbitOptions,
) -> Result<ProbitFit, LinkError> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(LinkError::Shape(format!("{n} rows but {} responses", y.len())));
    }
    if n < p || p == 0 {
        return Err(LinkError::Shape(format!("{n} rows for {p} columns")));
    }
    if y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(LinkError::Response);
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(LinkError::Shape("non-finite design entry".into()));
    }

    let plain = Newton {
        x,
        y,
        penalty: DVector::zeros(p),
    };
    let constant_y = y.iter().all(|&v| v == y[0]);
    let mut separated = constant_y;
    let mut result = None;
    if !separated {
        match newton(&plain, opts, true)? {
            Outcome::Diverging => separated = true,
            Outcome::Done {
                beta,
                converged,
                iterations,
            } => {
                let eta = x * &beta;
                let perfect = eta
                    .iter()
                    .zip(y.iter())
                    .all(|(&e, &yi)| normal_cdf(if yi > 0.5 { e } else { -e }) > 1.0 - 1e-6);
                if perfect {
                    separated = true;
                } else {
                    result = Some((plain, beta, converged, iterations));
                }
            }
        }
    }
    let (problem, beta, converged, iterations) = match result {
        Some(r) => r,
        None => {
            log::info!("probit: separation detected, refitting with ridge penalty {}", opts.ridge);
            let penalty = DVector::from_fn(p, |j, _| if is_intercept(x, j) { 0.0 } else { opts.ridge });
            let ridge = Newton { x, y, penalty };
            match newton(&ridge, opts, false)? {
                Outcome::Done {
                    beta,
                    converged,
                    iterations,
                } => (ridge, beta, converged, iterations),
                Outcome::Diverging => unreachable!("bound is not watched in the ridge fit"),
            }
        }
    };

    let state = problem.state(&beta);
    let std_errors = state
        .neg_hessian
        .clone()
        .try_inverse()
        .map(|inv| DVector::from_fn(p, |j, _| inv[(j, j)].max(0.0).sqrt()))
        .unwrap_or_else(|| DVector::from_element(p, f64::NAN));
    Ok(ProbitFit {
        log_likelihood: log_likelihood(x, y, &beta),
        gradient_norm: state.gradient.amax(),
        coefficients: beta,
        std_errors,
        converged,
        iterations,
        separation_flag: separated,
    })
}

pub fn fit_probit(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<ProbitFit, LinkError> {
    fit_probit_with(x, y, &ProbitOptions::default())
}
