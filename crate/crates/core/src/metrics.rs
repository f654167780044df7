//! ROC AUC and thresholded accuracy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::example::Label;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub auc: f64,
    pub accuracy: f64,
    pub n_pos: usize,
    pub n_neg: usize,
}

fn check_lengths(scores: &[f64], labels: &[Label]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            got: labels.len(),
        });
    }
    Ok(())
}

/// Area under the ROC curve via the Mann-Whitney rank statistic.
///
/// Tied scores get their average rank, so each tied positive/negative pair
/// contributes one half, which is the same area trapezoidal integration of
/// the ROC curve gives.
pub fn auc_roc(scores: &[f64], labels: &[Label]) -> Result<f64> {
    check_lengths(scores, labels)?;
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("score".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedAuc { n_pos, n_neg });
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Sum of positive ranks, doubled so tied groups stay integral.
    let mut twice_rank_sum: u64 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // 1-based ranks start+1 ..= end average to (start + 1 + end) / 2.
        let twice_avg = (start + 1 + end) as u64;
        let pos_in_group = order[start..end]
            .iter()
            .filter(|&&i| labels[i] == 1)
            .count() as u64;
        twice_rank_sum += twice_avg * pos_in_group;
        start = end;
    }
    let n_pos_u = n_pos as u64;
    let twice_u = twice_rank_sum - n_pos_u * (n_pos_u + 1);
    Ok(twice_u as f64 / (2 * n_pos_u * n_neg as u64) as f64)
}

/// Fraction of examples where `score >= threshold` agrees with the label.
pub fn accuracy(scores: &[f64], labels: &[Label], threshold: f64) -> Result<f64> {
    check_lengths(scores, labels)?;
    if scores.is_empty() {
        return Err(Error::invalid("accuracy of an empty set"));
    }
    let correct = scores
        .iter()
        .zip(labels)
        .filter(|(&s, &l)| (s >= threshold) == (l == 1))
        .count();
    Ok(correct as f64 / scores.len() as f64)
}

pub fn evaluate(scores: &[f64], labels: &[Label]) -> Result<EvalResult> {
    let auc = auc_roc(scores, labels)?;
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    Ok(EvalResult {
        auc,
        accuracy: accuracy(scores, labels, 0.5)?,
        n_pos,
        n_neg: labels.len() - n_pos,
    })
}
