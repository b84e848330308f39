//! Classification quality against the true reliability.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reliability::{ClassificationState, Label};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    /// The true high set is empty, so recall is 1 by convention.
    pub true_high_empty: bool,
}

/// Compares the estimated high set against `{x : p*(x) > α}`.
///
/// Precision is 1 when nothing is labelled high; recall is 1 when the true
/// high set is empty; F1 is 0 when precision and recall are both 0.
pub fn metrics(state: &ClassificationState, p_star: &[f64], alpha: f64) -> Result<Metrics> {
    if p_star.len() != state.len() {
        return Err(Error::DimensionMismatch {
            expected: state.len(),
            got: p_star.len(),
        });
    }
    let mut tp = 0usize;
    let mut predicted = 0usize;
    let mut actual = 0usize;
    for (l, &p) in state.labels.iter().zip(p_star) {
        let truth = p > alpha;
        let est = *l == Label::High;
        actual += truth as usize;
        predicted += est as usize;
        tp += (truth && est) as usize;
    }
    let precision = if predicted == 0 { 1.0 } else { tp as f64 / predicted as f64 };
    let recall = if actual == 0 { 1.0 } else { tp as f64 / actual as f64 };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(Metrics {
        f1,
        precision,
        recall,
        true_high_empty: actual == 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(s: &str) -> ClassificationState {
        ClassificationState::from_labels(
            s.chars()
                .map(|c| match c {
                    'H' => Label::High,
                    'L' => Label::Low,
                    _ => Label::Unclassified,
                })
                .collect(),
        )
    }

    #[test]
    fn counts() {
        let m = metrics(&state("HHLU"), &[0.99, 0.5, 0.99, 0.99], 0.95).unwrap();
        assert!((m.precision - 0.5).abs() < 1e-15);
        assert!((m.recall - 1.0 / 3.0).abs() < 1e-15);
        assert!((m.f1 - 0.4).abs() < 1e-15);
        assert!(!m.true_high_empty);
    }

    #[test]
    fn conventions() {
        let m = metrics(&state("LLU"), &[0.1, 0.2, 0.3], 0.95).unwrap();
        assert_eq!((m.precision, m.recall, m.f1), (1.0, 1.0, 1.0));
        assert!(m.true_high_empty);
        let m = metrics(&state("HL"), &[0.1, 0.99], 0.95).unwrap();
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
        assert!(metrics(&state("H"), &[0.1, 0.2], 0.95).is_err());
    }
}
