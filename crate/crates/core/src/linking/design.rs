use std::collections::{BTreeSet, HashMap};

use nalgebra::{DMatrix, DVector};

use super::LinkError;
use crate::abx::DiscriminabilityRecord;
use crate::dataset::HumanResponse;
use crate::feature_io::{Position, Trial};

/// Regression inputs for the probit linking model.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub names: Vec<String>,
    pub x: DMatrix<f64>,
    pub warnings: Vec<String>,
}

/// Raw per-response covariates, before column assembly.
#[derive(Debug, Clone)]
pub(crate) struct Covariates {
    pub delta: Vec<f64>,
    pub second: Vec<f64>,
    pub position: Vec<f64>,
    pub participant: Vec<String>,
    pub y: Vec<f64>,
    /// Trial id per row, for grouping by stimulus.
    pub trial_id: Vec<String>,
}

impl Covariates {
    /// Non-catch responses joined with their trial and record.
    pub(crate) fn gather(
        responses: &[HumanResponse],
        records: &[DiscriminabilityRecord],
        trials: &[Trial],
    ) -> Result<Self, LinkError> {
        let trials: HashMap<&str, &Trial> = trials.iter().map(|t| (t.trial_id.as_str(), t)).collect();
        let records: HashMap<&str, &DiscriminabilityRecord> =
            records.iter().map(|r| (r.trial_id.as_str(), r)).collect();
        let mut cov = Covariates {
            delta: Vec::new(),
            second: Vec::new(),
            position: Vec::new(),
            participant: Vec::new(),
            y: Vec::new(),
            trial_id: Vec::new(),
        };
        for r in responses.iter().filter(|r| !r.is_catch) {
            let trial = trials
                .get(r.trial_id.as_str())
                .ok_or_else(|| LinkError::Unmatched(format!("response for unknown trial {}", r.trial_id)))?;
            let record = records
                .get(r.trial_id.as_str())
                .ok_or_else(|| LinkError::Unmatched(format!("no record for trial {}", r.trial_id)))?;
            cov.delta.push(record.delta);
            cov.second.push(match trial.correct_position() {
                Position::First => 0.0,
                Position::Second => 1.0,
            });
            cov.position.push(r.trial_index as f64);
            cov.participant.push(r.participant_id.clone());
            cov.y.push(if r.correct { 1.0 } else { 0.0 });
            cov.trial_id.push(r.trial_id.clone());
        }
        Ok(cov)
    }

    pub(crate) fn len(&self) -> usize {
        self.y.len()
    }

    /// Builds the design over the given rows: intercept, standardized δ,
    /// correct-answer-second indicator, list position scaled to [0, 1] and
    /// participant dummies against the lexicographically smallest id.
    /// Constant non-intercept columns are dropped with a warning.
    pub(crate) fn assemble(&self, rows: &[usize]) -> (DesignMatrix, DVector<f64>) {
        let n = rows.len();
        let mut warnings = Vec::new();
        let mut columns: Vec<(String, Vec<f64>)> = vec![("intercept".into(), vec![1.0; n])];

        let delta: Vec<f64> = rows.iter().map(|&r| self.delta[r]).collect();
        let mean = delta.iter().sum::<f64>() / n as f64;
        let sd = (delta.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n as f64).sqrt();
        columns.push((
            "delta".into(),
            delta
                .iter()
                .map(|d| if sd > 0.0 { (d - mean) / sd } else { 0.0 })
                .collect(),
        ));
        columns.push(("correct_second".into(), rows.iter().map(|&r| self.second[r]).collect()));

        let pos: Vec<f64> = rows.iter().map(|&r| self.position[r]).collect();
        let (lo, hi) = pos
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &p| (lo.min(p), hi.max(p)));
        columns.push((
            "list_position".into(),
            pos.iter()
                .map(|p| if hi > lo { (p - lo) / (hi - lo) } else { 0.0 })
                .collect(),
        ));

        let participants: BTreeSet<&str> = rows.iter().map(|&r| self.participant[r].as_str()).collect();
        if participants.len() <= 1 {
            warnings.push("single participant: no participant columns".to_string());
        }
        for p in participants.iter().skip(1) {
            columns.push((
                format!("participant[{p}]"),
                rows.iter()
                    .map(|&r| if self.participant[r] == *p { 1.0 } else { 0.0 })
                    .collect(),
            ));
        }

        columns.retain(|(name, values)| {
            if name == "intercept" {
                return true;
            }
            let constant = values.windows(2).all(|w| w[0] == w[1]);
            if constant {
                warnings.push(format!("column {name} is constant and was dropped"));
            }
            !constant
        });
        for w in &warnings {
            log::debug!("{w}");
        }

        let x = DMatrix::from_fn(n, columns.len(), |i, j| columns[j].1[i]);
        let y = DVector::from_iterator(n, rows.iter().map(|&r| self.y[r]));
        (
            DesignMatrix {
                names: columns.into_iter().map(|(n, _)| n).collect(),
                x,
                warnings,
            },
            y,
        )
    }
}

/// Joins non-catch responses with their trials and δ records and builds the
/// regression design over all of them. Returns the design and the 0/1
/// correctness vector.
pub fn build_design(
    responses: &[HumanResponse],
    records: &[DiscriminabilityRecord],
    trials: &[Trial],
) -> Result<(DesignMatrix, DVector<f64>), LinkError> {
    let cov = Covariates::gather(responses, records, trials)?;
    if cov.len() == 0 {
        return Err(LinkError::Empty);
    }
    let rows: Vec<usize> = (0..cov.len()).collect();
    let (design, y) = cov.assemble(&rows);
    for w in &design.warnings {
        log::warn!("{w}");
    }
    Ok((design, y))
}
