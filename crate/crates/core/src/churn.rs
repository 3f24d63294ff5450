//! Reduction of churn classification to interval regression and back:
//! predicted logout intervals are thresholded by the churn criterion τ
//! and scored against the actual intervals.
//!
//! A user churns under criterion τ when the off-game interval reaches
//! τ; accuracy counts the indices where prediction and actual fall on
//! the same side:
//!
//! ```text
//! accuracy = Σ 1((t ≥ τ ∧ t* ≥ τ) ∨ (t < τ ∧ t* < τ)) / N_out
//! ```

use std::io;

use serde::{Deserialize, Serialize};

use crate::domain::{ChurnCriterion, EncodedSequence, StepKind, TargetTransform};
use crate::error::{Error, Result};
use crate::train::SequenceModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChurnLabel {
    Churn,
    Stay,
}

/// Threshold one predicted logout interval. The boundary t = τ counts
/// as churn.
pub fn classify(t_pred_seconds: f64, tau: &ChurnCriterion) -> Result<ChurnLabel> {
    if !t_pred_seconds.is_finite() || t_pred_seconds < 0.0 {
        return Err(Error::NegativeValue(t_pred_seconds));
    }
    Ok(if t_pred_seconds >= tau.tau_seconds { ChurnLabel::Churn } else { ChurnLabel::Stay })
}

/// Confusion counts over out-steps: actual churn/stay × predicted
/// churn/stay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ChurnCounts {
    /// actual churn, predicted churn
    pub tt: usize,
    /// actual churn, predicted stay
    pub ts: usize,
    /// actual stay, predicted churn
    pub st: usize,
    /// actual stay, predicted stay
    pub ss: usize,
}

impl ChurnCounts {
    pub fn n_out(&self) -> usize {
        self.tt + self.ts + self.st + self.ss
    }

    pub fn accuracy(&self) -> f64 {
        (self.tt + self.ss) as f64 / self.n_out() as f64
    }
}

fn count_pairs(actual: &[f64], predicted: &[f64], tau: &ChurnCriterion) -> Result<ChurnCounts> {
    if actual.is_empty() {
        return Err(Error::EmptyInput("churn accuracy over zero out-steps"));
    }
    if actual.len() != predicted.len() {
        return Err(Error::LengthMismatch { left: actual.len(), right: predicted.len() });
    }
    let mut counts = ChurnCounts::default();
    for (t, t_pred) in actual.iter().zip(predicted) {
        let a = classify(*t, tau)?;
        let p = classify(*t_pred, tau)?;
        match (a, p) {
            (ChurnLabel::Churn, ChurnLabel::Churn) => counts.tt += 1,
            (ChurnLabel::Churn, ChurnLabel::Stay) => counts.ts += 1,
            (ChurnLabel::Stay, ChurnLabel::Churn) => counts.st += 1,
            (ChurnLabel::Stay, ChurnLabel::Stay) => counts.ss += 1,
        }
    }
    Ok(counts)
}

/// Fraction of out-steps where the actual and predicted intervals fall
/// on the same side of τ.
pub fn churn_accuracy(
    actual_out: &[f64],
    predicted_out: &[f64],
    tau: &ChurnCriterion,
) -> Result<f64> {
    Ok(count_pairs(actual_out, predicted_out, tau)?.accuracy())
}

/// Scores for one τ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChurnReport {
    pub tau_seconds: f64,
    pub accuracy: f64,
    pub counts: ChurnCounts,
    pub n_out: usize,
}

/// Full evaluation output: per-τ reports plus the regression error in
/// transformed space over out-steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_tau: Vec<ChurnReport>,
    pub rmse_transformed: f64,
    pub n_out: usize,
}

/// Run forward passes over a dataset, inverse-transform the out-step
/// predictions to seconds, and score every τ.
pub fn evaluate<M: SequenceModel>(
    model: &M,
    sequences: &[EncodedSequence],
    taus: &[ChurnCriterion],
    transform: TargetTransform,
) -> Result<EvalReport> {
    let mut actual = Vec::new();
    let mut predicted = Vec::new();
    let mut sq_err = 0.0;
    for seq in sequences {
        let preds = model.predictions(seq)?;
        for (pred, step) in preds.iter().zip(&seq.steps) {
            if step.kind == StepKind::OffGame {
                actual.push(step.interval_seconds);
                predicted.push(transform.invert(*pred));
                let r = pred - step.target;
                sq_err += r * r;
            }
        }
    }
    if actual.is_empty() {
        return Err(Error::EmptyInput("dataset has no out-steps to evaluate"));
    }
    let mut per_tau = Vec::with_capacity(taus.len());
    for tau in taus {
        let counts = count_pairs(&actual, &predicted, tau)?;
        per_tau.push(ChurnReport {
            tau_seconds: tau.tau_seconds,
            accuracy: counts.accuracy(),
            counts,
            n_out: counts.n_out(),
        });
    }
    Ok(EvalReport {
        per_tau,
        rmse_transformed: (sq_err / actual.len() as f64).sqrt(),
        n_out: actual.len(),
    })
}

/// Accuracy of the constant predictor that always answers with the
/// majority class of `reference_out` at τ, scored on `actual_out`.
pub fn majority_baseline_accuracy(
    reference_out: &[f64],
    actual_out: &[f64],
    tau: &ChurnCriterion,
) -> Result<f64> {
    if reference_out.is_empty() || actual_out.is_empty() {
        return Err(Error::EmptyInput("majority baseline over zero out-steps"));
    }
    let churners = reference_out.iter().filter(|t| **t >= tau.tau_seconds).count();
    let predict_churn = 2 * churners >= reference_out.len();
    let constant = if predict_churn { tau.tau_seconds } else { 0.0 };
    let predicted = vec![constant; actual_out.len()];
    churn_accuracy(actual_out, &predicted, tau)
}

/// Emit reports as CSV with columns
/// (cohort, tau_days, accuracy, TT, TS, ST, SS, n_out).
pub fn write_report_csv<W: io::Write>(
    rows: &[(String, &ChurnReport)],
    writer: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["cohort", "tau_days", "accuracy", "TT", "TS", "ST", "SS", "n_out"])
        .map_err(|e| Error::Format(format!("csv: {e}")))?;
    for (cohort, report) in rows {
        w.write_record([
            cohort.clone(),
            format!("{}", report.tau_seconds / 86_400.0),
            format!("{}", report.accuracy),
            report.counts.tt.to_string(),
            report.counts.ts.to_string(),
            report.counts.st.to_string(),
            report.counts.ss.to_string(),
            report.n_out.to_string(),
        ])
        .map_err(|e| Error::Format(format!("csv: {e}")))?;
    }
    w.flush()?;
    Ok(())
}
