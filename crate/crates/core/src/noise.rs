//! Prior label corruption, epoch-wise label attacks, and the four label
//! scenarios they produce.
//!
//! Prior noise flips a training label once, before training, and the flip
//! persists. An epoch attack flips the stored label for a single epoch; the
//! stored label itself is never modified. Crossing the two gives four
//! scenarios per label and epoch:
//!
//! | stored label | attacked this epoch | effective label      |
//! |--------------|---------------------|----------------------|
//! | clean        | no                  | clean (`cl|cl`)      |
//! | corrupted    | yes                 | clean (`cl|co`)      |
//! | clean        | yes                 | corrupted (`co|cl`)  |
//! | corrupted    | no                  | corrupted (`co|co`)  |

use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};
use crate::example::{Label, LabeledExample};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    /// Each label flips independently with its class's probability.
    #[default]
    Bernoulli,
    /// Exactly `round(p * class_size)` labels per class flip, chosen
    /// uniformly without replacement.
    ExactCount,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    /// `P(stored = 0 | clean = 1)`.
    pub p_p: f64,
    /// `P(stored = 1 | clean = 0)`.
    pub p_n: f64,
    #[serde(default)]
    pub mode: NoiseMode,
}

impl NoiseSpec {
    /// Same flip probability for both classes.
    pub fn symmetric(p1: f64) -> Self {
        NoiseSpec {
            p_p: p1,
            p_n: p1,
            mode: NoiseMode::Bernoulli,
        }
    }

    pub fn none() -> Self {
        Self::symmetric(0.0)
    }

    pub fn with_mode(mut self, mode: NoiseMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_probability("p_p", self.p_p)?;
        check_probability("p_n", self.p_n)
    }

    fn for_class(&self, label: Label) -> f64 {
        if label == 1 {
            self.p_p
        } else {
            self.p_n
        }
    }
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self::none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackSpec {
    pub p2: f64,
}

impl AttackSpec {
    pub fn new(p2: f64) -> Result<Self> {
        check_probability("p2", p2)?;
        Ok(AttackSpec { p2 })
    }
}

/// Corrupt the stored labels of clean examples according to `spec`.
///
/// In Bernoulli mode one uniform is drawn per example regardless of its
/// class, so for a fixed stream the set of flipped examples at a smaller
/// probability is a subset of the set at a larger one.
pub fn inject_prior_noise(
    examples: &[LabeledExample],
    spec: &NoiseSpec,
    rng: &mut RngStream,
) -> Result<Vec<LabeledExample>> {
    spec.validate()?;
    if let Some(ex) = examples.iter().find(|e| e.stored_label != e.clean_label) {
        return Err(Error::invalid(format!(
            "example {} is already corrupted; prior noise expects clean input",
            ex.id
        )));
    }
    let mut out = examples.to_vec();
    match spec.mode {
        NoiseMode::Bernoulli => {
            for ex in &mut out {
                let u = rng.uniform();
                if u < spec.for_class(ex.clean_label) {
                    ex.set_stored_label(1 - ex.clean_label);
                }
            }
        }
        NoiseMode::ExactCount => {
            for class in [1u8, 0u8] {
                let mut members: Vec<usize> = out
                    .iter()
                    .enumerate()
                    .filter(|(_, e)| e.clean_label == class)
                    .map(|(i, _)| i)
                    .collect();
                let k = (spec.for_class(class) * members.len() as f64).round() as usize;
                rng.shuffle(&mut members);
                for &i in &members[..k.min(members.len())] {
                    out[i].set_stored_label(1 - class);
                }
            }
        }
    }
    Ok(out)
}

/// One epoch's attacked labels and the mask of which ones were flipped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpochAttack {
    pub labels: Vec<Label>,
    pub flip_mask: Vec<bool>,
}

/// Flip each stored label independently with probability `p2` for one epoch.
///
/// `stored_labels` is borrowed immutably: the attack never touches it.
pub fn epoch_attack_labels(
    stored_labels: &[Label],
    spec: &AttackSpec,
    epoch_rng: &mut RngStream,
) -> EpochAttack {
    let flip_mask: Vec<bool> = stored_labels
        .iter()
        .map(|_| epoch_rng.bernoulli(spec.p2))
        .collect();
    let labels = apply_flips(stored_labels, &flip_mask);
    EpochAttack { labels, flip_mask }
}

/// XOR `labels` with `mask`.
pub fn apply_flips(labels: &[Label], mask: &[bool]) -> Vec<Label> {
    labels
        .iter()
        .zip(mask)
        .map(|(&l, &f)| l ^ u8::from(f))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioProbabilities {
    pub p_cl_given_cl: f64,
    pub p_cl_given_co: f64,
    pub p_co_given_cl: f64,
    pub p_co_given_co: f64,
    pub p_clean: f64,
    pub p_corrupt: f64,
}

/// Probabilities of the four scenarios for prior flip rate `p1` and
/// attack rate `p2`.
pub fn scenario_probabilities(p1: f64, p2: f64) -> Result<ScenarioProbabilities> {
    check_probability("p1", p1)?;
    check_probability("p2", p2)?;
    let p_cl_given_cl = (1.0 - p1) * (1.0 - p2);
    let p_cl_given_co = p1 * p2;
    let p_co_given_cl = (1.0 - p1) * p2;
    let p_co_given_co = p1 * (1.0 - p2);
    Ok(ScenarioProbabilities {
        p_cl_given_cl,
        p_cl_given_co,
        p_co_given_cl,
        p_co_given_co,
        p_clean: p_cl_given_cl + p_cl_given_co,
        p_corrupt: p_co_given_cl + p_co_given_co,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ScenarioCounts {
    pub n_cl_given_cl: usize,
    pub n_cl_given_co: usize,
    pub n_co_given_cl: usize,
    pub n_co_given_co: usize,
}

impl ScenarioCounts {
    pub fn total(&self) -> usize {
        self.n_cl_given_cl + self.n_cl_given_co + self.n_co_given_cl + self.n_co_given_co
    }

    /// Labels that are correct for this epoch.
    pub fn clean(&self) -> usize {
        self.n_cl_given_cl + self.n_cl_given_co
    }

    pub fn corrupt(&self) -> usize {
        self.n_co_given_cl + self.n_co_given_co
    }

    /// Cell fractions in the order `cl|cl, cl|co, co|cl, co|co`.
    pub fn fractions(&self) -> [f64; 4] {
        let n = self.total().max(1) as f64;
        [
            self.n_cl_given_cl as f64 / n,
            self.n_cl_given_co as f64 / n,
            self.n_co_given_cl as f64 / n,
            self.n_co_given_co as f64 / n,
        ]
    }
}

impl std::ops::AddAssign for ScenarioCounts {
    fn add_assign(&mut self, rhs: Self) {
        self.n_cl_given_cl += rhs.n_cl_given_cl;
        self.n_cl_given_co += rhs.n_cl_given_co;
        self.n_co_given_cl += rhs.n_co_given_cl;
        self.n_co_given_co += rhs.n_co_given_co;
    }
}

pub fn classify_scenarios(prior_corrupted: &[bool], flip_mask: &[bool]) -> Result<ScenarioCounts> {
    if prior_corrupted.len() != flip_mask.len() {
        return Err(Error::DimensionMismatch {
            expected: prior_corrupted.len(),
            got: flip_mask.len(),
        });
    }
    let mut counts = ScenarioCounts::default();
    for (&corrupted, &flipped) in prior_corrupted.iter().zip(flip_mask) {
        match (corrupted, flipped) {
            (false, false) => counts.n_cl_given_cl += 1,
            (true, true) => counts.n_cl_given_co += 1,
            (false, true) => counts.n_co_given_cl += 1,
            (true, false) => counts.n_co_given_co += 1,
        }
    }
    Ok(counts)
}
