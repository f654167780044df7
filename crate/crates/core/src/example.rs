//! Labeled examples and the stratified train/validation/test split.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Binary class label. Stored as an integer so flipping is `1 - label`.
pub type Label = u8;

pub const DEFAULT_SPLIT: SplitFractions = SplitFractions {
    train: 0.7,
    validation: 0.1,
    test: 0.2,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub id: usize,
    pub features: Vec<f64>,
    pub clean_label: Label,
    pub stored_label: Label,
    pub prior_corrupted: bool,
}

impl LabeledExample {
    /// A clean example: the stored label equals the clean label.
    pub fn new(id: usize, features: Vec<f64>, label: Label) -> Result<Self> {
        check_label(label)?;
        Ok(LabeledExample {
            id,
            features,
            clean_label: label,
            stored_label: label,
            prior_corrupted: false,
        })
    }

    /// Overwrite the stored label, keeping `prior_corrupted` consistent.
    pub fn set_stored_label(&mut self, label: Label) {
        self.stored_label = label;
        self.prior_corrupted = label != self.clean_label;
    }

    pub fn is_consistent(&self) -> bool {
        self.prior_corrupted == (self.stored_label != self.clean_label)
    }
}

pub(crate) fn check_label(label: Label) -> Result<()> {
    if label <= 1 {
        Ok(())
    } else {
        Err(Error::invalid(format!("label must be 0 or 1, got {label}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitFractions {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        DEFAULT_SPLIT
    }
}

impl SplitFractions {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|f| !f.is_finite() || *f < 0.0) {
            return Err(Error::invalid(format!(
                "split fractions must be non-negative, got {parts:?}"
            )));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "split fractions must sum to 1, got {sum}"
            )));
        }
        Ok(())
    }

    /// Partition sizes for `n` examples. Validation and test are rounded,
    /// train takes the remainder.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let n_val = (self.validation * n as f64).round() as usize;
        let n_test = ((self.test * n as f64).round() as usize).min(n - n_val.min(n));
        let n_val = n_val.min(n);
        (n - n_val - n_test, n_val, n_test)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<LabeledExample>,
    pub validation: Vec<LabeledExample>,
    pub test: Vec<LabeledExample>,
    pub fractions: SplitFractions,
}

impl DatasetSplit {
    pub fn len(&self) -> usize {
        self.train.len() + self.validation.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Shuffle and partition `examples`, stratified by clean label.
///
/// Each class is shuffled on its own, then the classes are interleaved by
/// relative position so that every prefix of the merged order holds each
/// class in proportion (to within one example per class). The merged order is
/// cut at the global partition sizes.
pub fn split_dataset(
    examples: &[LabeledExample],
    fractions: SplitFractions,
    rng: &mut RngStream,
) -> Result<DatasetSplit> {
    fractions.validate()?;
    if examples.is_empty() {
        return Err(Error::invalid("cannot split an empty dataset"));
    }
    let n = examples.len();
    let (n_train, n_val, n_test) = fractions.sizes(n);
    if n_train == 0 || n_val == 0 || n_test == 0 {
        return Err(Error::invalid(format!(
            "split of {n} examples by {fractions:?} leaves an empty partition \
             ({n_train}/{n_val}/{n_test})"
        )));
    }

    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, ex) in examples.iter().enumerate() {
        by_class[ex.clean_label as usize].push(i);
    }
    let mut keyed: Vec<(f64, u8, usize)> = Vec::with_capacity(n);
    for (class, members) in by_class.iter_mut().enumerate() {
        rng.shuffle(members);
        let m = members.len() as f64;
        for (rank, &idx) in members.iter().enumerate() {
            keyed.push(((rank as f64 + 0.5) / m, class as u8, idx));
        }
    }
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let take = |range: std::ops::Range<usize>| -> Vec<LabeledExample> {
        keyed[range]
            .iter()
            .map(|&(_, _, idx)| examples[idx].clone())
            .collect()
    };
    Ok(DatasetSplit {
        train: take(0..n_train),
        validation: take(n_train..n_train + n_val),
        test: take(n_train + n_val..n),
        fractions,
    })
}
