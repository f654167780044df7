//! Binomial flip-count probabilities and the epoch-wise flip probability
//! derived from them.
//!
//! If a label is attacked independently with probability `p` in each of `n`
//! epochs, the number of epochs in which it is flipped is `Binomial(n, p)`.
//! Choosing `p` amounts to placing the mean flip count `p * n` between a lower
//! anchor `k1` (never flipped) and an upper anchor `k2` (flipped in half the
//! epochs).

use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinomialParams {
    pub k: u64,
    pub n: u64,
    pub p: f64,
}

impl BinomialParams {
    pub fn new(k: u64, n: u64, p: f64) -> Result<Self> {
        let params = BinomialParams { k, n, p };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        check_probability("p", self.p)?;
        if self.k > self.n {
            return Err(Error::invalid(format!(
                "flip count k = {} exceeds epoch count n = {}",
                self.k, self.n
            )));
        }
        Ok(())
    }
}

/// `ln C(n, k)` as a sum of `ln((n - k + i) / i)`.
fn ln_choose(n: u64, k: u64) -> f64 {
    let k = k.min(n - k);
    (1..=k)
        .map(|i| (((n - k + i) as f64) / (i as f64)).ln())
        .sum()
}

/// `x * ln(y)` with the convention `0 * ln(0) = 0`.
fn xlny(x: u64, y: f64) -> f64 {
    if x == 0 {
        0.0
    } else {
        x as f64 * y.ln()
    }
}

fn pmf_unchecked(k: u64, n: u64, p: f64) -> f64 {
    let log = ln_choose(n, k) + xlny(k, p) + xlny(n - k, 1.0 - p);
    log.exp().clamp(0.0, 1.0)
}

/// `B(k | p, n) = C(n, k) p^k (1 - p)^(n - k)`, evaluated in log space.
pub fn binomial_pmf(params: BinomialParams) -> Result<f64> {
    params.validate()?;
    Ok(pmf_unchecked(params.k, params.n, params.p))
}

/// `P(K >= k0)` for `K ~ Binomial(n, p)`. `k0 = n + 1` gives 0.
pub fn binomial_tail_ge(k0: u64, p: f64, n: u64) -> Result<f64> {
    check_probability("p", p)?;
    if k0 > n + 1 {
        return Err(Error::invalid(format!(
            "tail start k0 = {k0} exceeds n + 1 = {}",
            n + 1
        )));
    }
    if k0 == 0 {
        return Ok(1.0);
    }
    // Sum whichever side has fewer terms, smallest terms first.
    let upper = n + 1 - k0;
    let tail = if upper <= k0 {
        (k0..=n).rev().map(|k| pmf_unchecked(k, n, p)).sum::<f64>()
    } else {
        let lower: f64 = (0..k0).map(|k| pmf_unchecked(k, n, p)).sum();
        1.0 - lower
    };
    Ok(tail.clamp(0.0, 1.0))
}

/// The `k >= n/2` threshold for "flipped in half or more of the epochs".
pub fn majority_threshold(n: u64) -> u64 {
    n.div_ceil(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinomialDerivation {
    pub k1: u64,
    pub k2: u64,
    pub n: u64,
    pub mu: f64,
    pub p2: f64,
    /// `B(k = 0)` at the derived `p2`.
    pub prob_never_flipped: f64,
    /// `B(k >= ceil(n / 2))` at the derived `p2`.
    pub prob_majority_flipped: f64,
    /// `|B(k1) - B(k2)|` at the derived `p2`. The mean-matching rule only
    /// balances the two anchors approximately when `p2 != 0.5`.
    pub anchor_residual: f64,
}

/// Place the mean flip count halfway between the anchors:
/// `p2 = (k1 + k2) / (2 n)`.
pub fn derive_p2(k1: u64, k2: u64, n: u64) -> Result<BinomialDerivation> {
    if n == 0 {
        return Err(Error::invalid("epoch count n must be at least 1"));
    }
    if k1 >= k2 {
        return Err(Error::invalid(format!(
            "anchors must satisfy k1 < k2, got k1 = {k1}, k2 = {k2}"
        )));
    }
    if k2 > n {
        return Err(Error::invalid(format!(
            "upper anchor k2 = {k2} exceeds n = {n}"
        )));
    }
    let p2 = (k1 + k2) as f64 / (2 * n) as f64;
    let mu = (k1 + k2) as f64 / 2.0;
    Ok(BinomialDerivation {
        k1,
        k2,
        n,
        mu,
        p2,
        prob_never_flipped: pmf_unchecked(0, n, p2),
        prob_majority_flipped: binomial_tail_ge(majority_threshold(n), p2, n)?,
        anchor_residual: (pmf_unchecked(k1, n, p2) - pmf_unchecked(k2, n, p2)).abs(),
    })
}

/// Mean of past run lengths, rounded to the nearest integer (halves round up).
pub fn estimate_epoch_count(past_run_lengths: &[u64]) -> Result<u64> {
    if past_run_lengths.is_empty() {
        return Err(Error::invalid("run history is empty"));
    }
    if past_run_lengths.contains(&0) {
        return Err(Error::invalid("run lengths must be at least 1 epoch"));
    }
    let total: u64 = past_run_lengths.iter().sum();
    let count = past_run_lengths.len() as u64;
    // floor((2 * total + count) / (2 * count)) == round-half-up(total / count)
    Ok((2 * total + count) / (2 * count))
}
