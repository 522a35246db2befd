//! Frame divergences and the length-normalized DTW distance.

use std::f64::consts::PI;
use std::str::FromStr;

use thiserror::Error;

use crate::feature_io::{FeatureSequence, Mode};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("dimension mismatch: {0} vs {1}")]
    Dimension(usize, usize),
    #[error("non-finite input")]
    NonFinite,
    #[error("zero vector has no direction")]
    ZeroVector,
    #[error("symmetrized KL requires probability-mode sequences ({0} is not)")]
    Mode(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DivergenceKind {
    SymmetrizedKl,
    AngularCosine,
}

impl DivergenceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DivergenceKind::SymmetrizedKl => "kl",
            DivergenceKind::AngularCosine => "cosine",
        }
    }

    pub fn eval(self, x: &[f64], y: &[f64]) -> Result<f64, MetricError> {
        match self {
            DivergenceKind::SymmetrizedKl => gamma_kl(x, y),
            DivergenceKind::AngularCosine => gamma_cos(x, y),
        }
    }
}

impl FromStr for DivergenceKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "kl" | "symmetrized_kl" => Ok(DivergenceKind::SymmetrizedKl),
            "cosine" | "angular_cosine" => Ok(DivergenceKind::AngularCosine),
            other => Err(format!("unknown divergence {other:?} (expected kl|cosine)")),
        }
    }
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<(), MetricError> {
    if x.len() != y.len() {
        return Err(MetricError::Dimension(x.len(), y.len()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(MetricError::NonFinite);
    }
    Ok(())
}

/// Symmetrized Kullback-Leibler divergence, `½[KL(x‖y) + KL(y‖x)]`.
///
/// Inputs are expected to be floored already (no exact zeros). Written as
/// `½ Σ (x_i − y_i)(ln x_i − ln y_i)`, which is the same sum with every term
/// non-negative.
pub fn gamma_kl(x: &[f64], y: &[f64]) -> Result<f64, MetricError> {
    check_pair(x, y)?;
    let mut acc = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        if a < 0.0 || b < 0.0 {
            return Err(MetricError::NonFinite);
        }
        if a != b {
            acc += (a - b) * (a.ln() - b.ln());
        }
    }
    if !acc.is_finite() {
        return Err(MetricError::NonFinite);
    }
    Ok(0.5 * acc)
}

/// Angle between `x` and `y` divided by π, in `[0, 1]`.
pub fn gamma_cos(x: &[f64], y: &[f64]) -> Result<f64, MetricError> {
    check_pair(x, y)?;
    let (nx, ny) = (norm(x), norm(y));
    if nx == 0.0 || ny == 0.0 {
        return Err(MetricError::ZeroVector);
    }
    Ok(cos_from_norms(x, y, nx, ny))
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Angle between `x` and `y` as `2·atan2(|x̂ − ŷ|, |x̂ + ŷ|)`, which equals the
/// arccosine of the cosine but keeps full precision near 0 and π.
fn cos_from_norms(x: &[f64], y: &[f64], nx: f64, ny: f64) -> f64 {
    if x == y {
        return 0.0;
    }
    let (mut minus, mut plus) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (u, v) = (a / nx, b / ny);
        minus += (u - v) * (u - v);
        plus += (u + v) * (u + v);
    }
    2.0 * minus.sqrt().atan2(plus.sqrt()) / PI
}

/// A monotone alignment path, 0-based `(i, j)` pairs from `(0, 0)` to `(p-1, q-1)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    pub pairs: Vec<(usize, usize)>,
}

impl Alignment {
    /// Checks the endpoint and step invariants for sequences of length `p`, `q`.
    pub fn is_valid(&self, p: usize, q: usize) -> bool {
        let Some(&first) = self.pairs.first() else {
            return false;
        };
        if first != (0, 0) || self.pairs.last() != Some(&(p - 1, q - 1)) {
            return false;
        }
        self.pairs.windows(2).all(|w| {
            let (di, dj) = (w[1].0 as isize - w[0].0 as isize, w[1].1 as isize - w[0].1 as isize);
            matches!((di, dj), (1, 0) | (0, 1) | (1, 1))
        })
    }
}

/// Pairwise frame cost matrix, row-major `p × q`.
pub fn cost_matrix(
    c: &FeatureSequence,
    d: &FeatureSequence,
    gamma: DivergenceKind,
) -> Result<Vec<f64>, MetricError> {
    if c.dim() != d.dim() {
        return Err(MetricError::Dimension(c.dim(), d.dim()));
    }
    let (p, q) = (c.len(), d.len());
    let mut out = Vec::with_capacity(p * q);
    match gamma {
        DivergenceKind::SymmetrizedKl => {
            for s in [c, d] {
                if s.mode() != Mode::Probability {
                    return Err(MetricError::Mode(s.stimulus_id().to_string()));
                }
            }
            for ci in c.frames() {
                for dj in d.frames() {
                    out.push(gamma_kl(ci, dj)?);
                }
            }
        }
        DivergenceKind::AngularCosine => {
            let norms = |s: &FeatureSequence| -> Result<Vec<f64>, MetricError> {
                s.frames()
                    .map(|f| match norm(f) {
                        0.0 => Err(MetricError::ZeroVector),
                        n => Ok(n),
                    })
                    .collect()
            };
            let (nc, nd) = (norms(c)?, norms(d)?);
            for (ci, &ni) in c.frames().zip(&nc) {
                for (dj, &nj) in d.frames().zip(&nd) {
                    out.push(cos_from_norms(ci, dj, ni, nj));
                }
            }
        }
    }
    Ok(out)
}

fn accumulate(cost: &[f64], p: usize, q: usize) -> Vec<f64> {
    let mut acc = vec![0.0f64; p * q];
    for i in 0..p {
        for j in 0..q {
            let best = match (i, j) {
                (0, 0) => 0.0,
                (0, _) => acc[j - 1],
                (_, 0) => acc[(i - 1) * q],
                _ => acc[(i - 1) * q + j - 1]
                    .min(acc[(i - 1) * q + j])
                    .min(acc[i * q + j - 1]),
            };
            acc[i * q + j] = best + cost[i * q + j];
        }
    }
    acc
}

/// Minimal summed divergence over monotone alignments, divided by `max(p, q)`.
pub fn dtw_distance(
    c: &FeatureSequence,
    d: &FeatureSequence,
    gamma: DivergenceKind,
) -> Result<f64, MetricError> {
    let (p, q) = (c.len(), d.len());
    let cost = cost_matrix(c, d, gamma)?;
    let acc = accumulate(&cost, p, q);
    Ok(acc[p * q - 1] / p.max(q) as f64)
}

/// Like [`dtw_distance`], also returning one optimal path.
pub fn dtw_alignment(
    c: &FeatureSequence,
    d: &FeatureSequence,
    gamma: DivergenceKind,
) -> Result<(f64, Alignment), MetricError> {
    let (p, q) = (c.len(), d.len());
    let cost = cost_matrix(c, d, gamma)?;
    let acc = accumulate(&cost, p, q);
    let mut pairs = vec![(p - 1, q - 1)];
    let (mut i, mut j) = (p - 1, q - 1);
    while (i, j) != (0, 0) {
        (i, j) = match (i, j) {
            (0, _) => (0, j - 1),
            (_, 0) => (i - 1, 0),
            _ => {
                let diag = acc[(i - 1) * q + j - 1];
                let up = acc[(i - 1) * q + j];
                let left = acc[i * q + j - 1];
                if diag <= up && diag <= left {
                    (i - 1, j - 1)
                } else if up <= left {
                    (i - 1, j)
                } else {
                    (i, j - 1)
                }
            }
        };
        pairs.push((i, j));
    }
    pairs.reverse();
    Ok((acc[p * q - 1] / p.max(q) as f64, Alignment { pairs }))
}
