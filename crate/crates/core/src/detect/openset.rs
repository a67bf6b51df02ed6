use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::domain::{ClassId, FeatureMatrix, UNKNOWN_CLASS};
use crate::error::{Error, Result};
use crate::ml::{predict_proba, Probabilities, TrainedModel};

fn check_threshold(threshold: f64) -> Result<()> {
    if (0.0..=1.0).contains(&threshold) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "decision threshold {threshold} is outside [0, 1]"
        )))
    }
}

fn reject(p: &Probabilities, i: usize, threshold: f64) -> ClassId {
    let (class, prob) = p.argmax(i);
    if prob >= threshold {
        class
    } else {
        UNKNOWN_CLASS
    }
}

/// Most probable class when its probability reaches `threshold`, otherwise
/// [`UNKNOWN_CLASS`].
pub fn classify_with_rejection(model: &TrainedModel, rows: &FeatureMatrix, threshold: f64) -> Result<Vec<ClassId>> {
    check_threshold(threshold)?;
    let p = predict_proba(model, rows)?;
    Ok((0..p.n_rows()).map(|i| reject(&p, i, threshold)).collect())
}

/// Open-set scores at one decision threshold. "Known" is the positive class
/// of the known-versus-unknown decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpenSetReport {
    pub threshold: f64,
    /// Known rows given their correct class; rejected rows count as errors.
    pub known_accuracy: f64,
    /// Unknown rows that were rejected.
    pub unknown_accuracy: f64,
    /// Known rows that were not rejected.
    pub known_retention: f64,
    /// Accepted rows that are known; 0 when nothing is accepted.
    pub precision: f64,
    /// Same as `known_retention`.
    pub recall: f64,
}

/// Sweeps decision thresholds over known and unknown test rows.
pub fn open_set_eval(
    model: &TrainedModel,
    known_test: &FeatureMatrix,
    unknown_test: &FeatureMatrix,
    thresholds: &[f64],
) -> Result<Vec<OpenSetReport>> {
    if unknown_test.labels().iter().any(|&l| l != UNKNOWN_CLASS) {
        return Err(Error::InvalidArgument(
            "unknown test rows must carry the unknown label".into(),
        ));
    }
    if known_test.n_rows() == 0 || unknown_test.n_rows() == 0 {
        return Err(Error::InvalidArgument(
            "open-set evaluation needs known and unknown rows".into(),
        ));
    }
    for &t in thresholds {
        check_threshold(t)?;
    }
    let pk = predict_proba(model, known_test)?;
    let pu = predict_proba(model, unknown_test)?;
    let n_known = known_test.n_rows() as f64;
    let n_unknown = unknown_test.n_rows() as f64;
    Ok(thresholds
        .iter()
        .map(|&t| {
            let mut correct = 0usize;
            let mut accepted_known = 0usize;
            for (i, &truth) in known_test.labels().iter().enumerate() {
                let pred = reject(&pk, i, t);
                if pred != UNKNOWN_CLASS {
                    accepted_known += 1;
                    correct += usize::from(pred == truth);
                }
            }
            let rejected_unknown = (0..unknown_test.n_rows())
                .filter(|&i| reject(&pu, i, t) == UNKNOWN_CLASS)
                .count();
            let false_pos = unknown_test.n_rows() - rejected_unknown;
            let precision = if accepted_known + false_pos == 0 {
                0.0
            } else {
                accepted_known as f64 / (accepted_known + false_pos) as f64
            };
            let retention = accepted_known as f64 / n_known;
            OpenSetReport {
                threshold: t,
                known_accuracy: correct as f64 / n_known,
                unknown_accuracy: rejected_unknown as f64 / n_unknown,
                known_retention: retention,
                precision,
                recall: retention,
            }
        })
        .collect())
}

/// `threshold,known_accuracy,unknown_accuracy,known_retention,precision,recall` rows.
pub fn open_set_csv(reports: &[OpenSetReport]) -> String {
    let mut out = String::from("threshold,known_accuracy,unknown_accuracy,known_retention,precision,recall\n");
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.threshold, r.known_accuracy, r.unknown_accuracy, r.known_retention, r.precision, r.recall
        );
    }
    out
}

/// `steps + 1` evenly spaced thresholds from 0 to 1.
pub fn threshold_grid(steps: usize) -> Vec<f64> {
    let steps = steps.max(1);
    (0..=steps).map(|i| i as f64 / steps as f64).collect()
}
