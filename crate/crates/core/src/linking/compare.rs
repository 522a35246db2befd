use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::DVector;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::design::Covariates;
use super::probit::{fit_probit, log_likelihood};
use super::LinkError;
use crate::abx::DiscriminabilityRecord;
use crate::dataset::HumanResponse;
use crate::feature_io::Trial;

/// Responses drawn per stimulus in each balanced subsample.
pub const PER_STIMULUS: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subsample {
    /// Selected row indices, grouped by stimulus in input order, ascending
    /// within each stimulus.
    pub rows: Vec<usize>,
    /// Stimuli with fewer than `k` responses.
    pub skipped: Vec<String>,
}

/// Draws `k` distinct rows from every group without replacement.
pub fn balanced_subsample(
    groups: &[(String, Vec<usize>)],
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Subsample {
    let mut out = Subsample {
        rows: Vec::with_capacity(groups.len() * k),
        skipped: Vec::new(),
    };
    for (stimulus, rows) in groups {
        if rows.len() < k {
            log::warn!("stimulus {stimulus} has {} responses, fewer than {k}; skipped", rows.len());
            out.skipped.push(stimulus.clone());
            continue;
        }
        let mut picked: Vec<usize> = index::sample(rng, rows.len(), k).into_iter().map(|i| rows[i]).collect();
        picked.sort_unstable();
        out.rows.extend(picked);
    }
    out
}

/// Generator for resample `index`: one ChaCha stream per resample.
pub fn resample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareOptions {
    pub resamples: usize,
    pub seed: u64,
    pub per_stimulus: usize,
    /// Refit every model on each subsample; otherwise fit once on all rows
    /// and evaluate the log-likelihood on each subsample.
    pub refit: bool,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self {
            resamples: 1000,
            seed: 0,
            per_stimulus: PER_STIMULUS,
            refit: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonCell {
    pub row: String,
    pub col: String,
    /// Mean of `LL(row) − LL(col)` over usable resamples.
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
    pub significant: bool,
    pub resamples: usize,
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonMatrix {
    /// Models ordered by descending mean log-likelihood.
    pub models: Vec<String>,
    pub mean_log_likelihood: Vec<f64>,
    /// Row-major over `models`.
    pub cells: Vec<ComparisonCell>,
    pub subsample_size: usize,
    /// Per-resample log-likelihood differences, row-major like `cells`;
    /// `None` where a fit failed.
    pub differences: Vec<Vec<Option<f64>>>,
}

impl ComparisonMatrix {
    pub fn cell(&self, row: &str, col: &str) -> Option<&ComparisonCell> {
        self.cells.iter().find(|c| c.row == row && c.col == col)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["row_model", "col_model", "mean", "lo", "hi", "significant", "resamples", "excluded"])?;
        for c in &self.cells {
            w.write_record([
                c.row.as_str(),
                &c.col,
                &format!("{:e}", c.mean),
                &format!("{:e}", c.lo),
                &format!("{:e}", c.hi),
                if c.significant { "1" } else { "0" },
                &c.resamples.to_string(),
                &c.excluded.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Linear-interpolation percentile of sorted data, `q` in [0, 1].
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

type UpperCell = (ComparisonCell, Vec<Option<f64>>);

/// Resampled log-likelihood differences between linking models built on
/// each model's δ records.
pub fn compare_models(
    models: &[(String, Vec<DiscriminabilityRecord>)],
    responses: &[HumanResponse],
    trials: &[Trial],
    opts: &CompareOptions,
) -> Result<ComparisonMatrix, LinkError> {
    if models.is_empty() {
        return Err(LinkError::Empty);
    }
    if opts.resamples == 0 {
        return Err(LinkError::Shape("need at least one resample".into()));
    }
    let covariates = models
        .iter()
        .map(|(_, records)| Covariates::gather(responses, records, trials))
        .collect::<Result<Vec<_>, _>>()?;
    let n = covariates[0].len();
    if n == 0 {
        return Err(LinkError::Empty);
    }

    let mut by_stimulus: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (row, id) in covariates[0].trial_id.iter().enumerate() {
        by_stimulus.entry(id).or_default().push(row);
    }
    let groups: Vec<(String, Vec<usize>)> = by_stimulus
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();

    // fixed fits for the evaluate-only mode
    let full_fits = if opts.refit {
        None
    } else {
        let all: Vec<usize> = (0..n).collect();
        Some(
            covariates
                .iter()
                .map(|cov| {
                    let (design, y) = cov.assemble(&all);
                    let fit = fit_probit(&design.x, &y).ok().filter(|f| f.converged);
                    (design, y, fit)
                })
                .collect::<Vec<_>>(),
        )
    };

    let per_resample: Vec<(usize, Vec<Option<f64>>)> = (0..opts.resamples)
        .into_par_iter()
        .map(|r| {
            let mut rng = resample_rng(opts.seed, r as u64);
            let sub = balanced_subsample(&groups, opts.per_stimulus, &mut rng);
            let lls = covariates
                .iter()
                .enumerate()
                .map(|(m, cov)| match &full_fits {
                    None => {
                        let (design, y) = cov.assemble(&sub.rows);
                        fit_probit(&design.x, &y)
                            .ok()
                            .filter(|f| f.converged)
                            .map(|f| f.log_likelihood)
                    }
                    Some(fits) => {
                        let (design, y, fit) = &fits[m];
                        fit.as_ref().map(|f| {
                            let x = design.x.select_rows(&sub.rows);
                            let ys = DVector::from_iterator(sub.rows.len(), sub.rows.iter().map(|&i| y[i]));
                            log_likelihood(&x, &ys, &f.coefficients)
                        })
                    }
                })
                .collect();
            (sub.rows.len(), lls)
        })
        .collect();

    let subsample_size = per_resample[0].0;
    let k = models.len();
    let mean_ll: Vec<f64> = (0..k)
        .map(|m| {
            let ok: Vec<f64> = per_resample.iter().filter_map(|(_, l)| l[m]).collect();
            if ok.is_empty() {
                f64::NEG_INFINITY
            } else {
                ok.iter().sum::<f64>() / ok.len() as f64
            }
        })
        .collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        mean_ll[b]
            .total_cmp(&mean_ll[a])
            .then_with(|| models[a].0.cmp(&models[b].0))
    });

    let mut cells = Vec::with_capacity(k * k);
    let mut differences = Vec::with_capacity(k * k);
    let mut upper: BTreeMap<(usize, usize), UpperCell> = BTreeMap::new();
    for (i, &a) in order.iter().enumerate() {
        for (j, &b) in order.iter().enumerate() {
            let (cell, diffs) = if j < i {
                let (c, d) = &upper[&(j, i)];
                (
                    ComparisonCell {
                        row: models[a].0.clone(),
                        col: models[b].0.clone(),
                        mean: -c.mean,
                        lo: -c.hi,
                        hi: -c.lo,
                        significant: c.significant,
                        resamples: c.resamples,
                        excluded: c.excluded,
                    },
                    d.iter().map(|v| v.map(|x| -x)).collect(),
                )
            } else {
                let diffs: Vec<Option<f64>> = per_resample
                    .iter()
                    .map(|(_, l)| Some(l[a]? - l[b]?))
                    .collect();
                let mut used: Vec<f64> = diffs.iter().flatten().copied().collect();
                let excluded = diffs.len() - used.len();
                if excluded > 0 {
                    log::warn!(
                        "{} vs {}: {excluded} resamples excluded after failed fits",
                        models[a].0,
                        models[b].0
                    );
                }
                let (mean, lo, hi) = if used.is_empty() {
                    (f64::NAN, f64::NAN, f64::NAN)
                } else {
                    let mean = used.iter().sum::<f64>() / used.len() as f64;
                    used.sort_by(f64::total_cmp);
                    (mean, percentile(&used, 0.025), percentile(&used, 0.975))
                };
                let cell = ComparisonCell {
                    row: models[a].0.clone(),
                    col: models[b].0.clone(),
                    mean,
                    lo,
                    hi,
                    significant: lo > 0.0 || hi < 0.0,
                    resamples: used.len(),
                    excluded,
                };
                upper.insert((i, j), (cell.clone(), diffs.clone()));
                (cell, diffs)
            };
            cells.push(cell);
            differences.push(diffs);
        }
    }

    Ok(ComparisonMatrix {
        models: order.iter().map(|&m| models[m].0.clone()).collect(),
        mean_log_likelihood: order.iter().map(|&m| mean_ll[m]).collect(),
        cells,
        subsample_size,
        differences,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn groups(sizes: &[usize]) -> Vec<(String, Vec<usize>)> {
        let mut next = 0;
        sizes
            .iter()
            .enumerate()
            .map(|(g, &s)| {
                let rows = (next..next + s).collect();
                next += s;
                (format!("s{g}"), rows)
            })
            .collect()
    }

    #[test]
    fn exactly_three_forced() {
        let sub = balanced_subsample(&groups(&[3]), 3, &mut resample_rng(1, 0));
        assert_eq!(sub.rows, vec![0, 1, 2]);
    }

    #[test]
    fn three_distinct_from_six() {
        let g = groups(&[6, 2, 4]);
        let sub = balanced_subsample(&g, 3, &mut resample_rng(9, 4));
        assert_eq!(sub.rows.len(), 6);
        assert_eq!(sub.skipped, vec!["s1".to_string()]);
        let first: Vec<usize> = sub.rows.iter().copied().filter(|&r| r < 6).collect();
        assert_eq!(first.len(), 3);
        assert!(first.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn seeded_reproducibility() {
        let g = groups(&[6; 50]);
        let a = balanced_subsample(&g, 3, &mut resample_rng(5, 2));
        let b = balanced_subsample(&g, 3, &mut resample_rng(5, 2));
        let c = balanced_subsample(&g, 3, &mut resample_rng(5, 3));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn percentile_interpolates() {
        let v = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile(&v, 0.5), 2.0);
        assert_eq!(percentile(&v, 0.025), 0.1);
        assert_eq!(percentile(&[7.0], 0.975), 7.0);
    }
}
