//! Browser bindings. Each operation returns a JSON string so the page can
//! stay framework-free; the plain Rust functions are what the wasm exports
//! wrap, which keeps them testable on the host.

use labelnoise::binom::{binomial_pmf, derive_p2, majority_threshold, BinomialParams};
use labelnoise::noise::{scenario_probabilities, AttackSpec, NoiseSpec};
use labelnoise::trainer::{train, TrainConfig};
use serde::Serialize;

#[derive(Serialize)]
struct Curve {
    derivation: labelnoise::binom::BinomialDerivation,
    threshold: u64,
    pmf: Vec<f64>,
}

/// Derived `p2` for anchors `k1 < k2` over `n` epochs, with the full
/// flip-count distribution at that rate.
pub fn binomial_curve(k1: u32, k2: u32, n: u32) -> Result<String, String> {
    let (k1, k2, n) = (k1 as u64, k2 as u64, n as u64);
    let derivation = derive_p2(k1, k2, n).map_err(|e| e.to_string())?;
    let pmf = (0..=n)
        .map(|k| {
            binomial_pmf(BinomialParams {
                k,
                n,
                p: derivation.p2,
            })
        })
        .collect::<labelnoise::Result<Vec<_>>>()
        .map_err(|e| e.to_string())?;
    to_json(&Curve {
        derivation,
        threshold: majority_threshold(n),
        pmf,
    })
}

pub fn scenarios(p1: f64, p2: f64) -> Result<String, String> {
    to_json(&scenario_probabilities(p1, p2).map_err(|e| e.to_string())?)
}

#[derive(Serialize)]
struct EpochPoint {
    epoch: usize,
    train_loss: f64,
    val_accuracy: f64,
    /// cl|cl, cl|co, co|cl, co|co
    scenarios: [f64; 4],
}

#[derive(Serialize)]
struct RunSummary {
    test_auc: f64,
    test_accuracy: f64,
    best_epoch: usize,
    n_actual: usize,
    n_prior_corrupted: usize,
    n_train: usize,
    epochs: Vec<EpochPoint>,
}

/// One training run on the default synthetic data with prior noise `p1`
/// and attack rate `p2`.
pub fn train_run(p1: f64, p2: f64, seed: u64) -> Result<String, String> {
    let config = TrainConfig {
        noise: NoiseSpec::symmetric(p1),
        attack: AttackSpec::new(p2).map_err(|e| e.to_string())?,
        master_seed: seed,
        ..TrainConfig::default()
    };
    let report = train(&config).map_err(|e| e.to_string())?;
    to_json(&RunSummary {
        test_auc: report.test_auc,
        test_accuracy: report.test_accuracy,
        best_epoch: report.best_epoch,
        n_actual: report.n_actual,
        n_prior_corrupted: report.n_prior_corrupted,
        n_train: report.n_train,
        epochs: report
            .epochs
            .iter()
            .map(|e| EpochPoint {
                epoch: e.epoch,
                train_loss: e.train_loss,
                val_accuracy: e.val_accuracy,
                scenarios: e.scenarios.fractions(),
            })
            .collect(),
    })
}

fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

#[cfg(target_arch = "wasm32")]
mod bindings {
    use wasm_bindgen::prelude::*;

    fn js(r: Result<String, String>) -> Result<String, JsError> {
        r.map_err(|e| JsError::new(&e))
    }

    #[wasm_bindgen(js_name = binomialCurve)]
    pub fn binomial_curve(k1: u32, k2: u32, n: u32) -> Result<String, JsError> {
        js(super::binomial_curve(k1, k2, n))
    }

    #[wasm_bindgen]
    pub fn scenarios(p1: f64, p2: f64) -> Result<String, JsError> {
        js(super::scenarios(p1, p2))
    }

    #[wasm_bindgen(js_name = trainRun)]
    pub fn train_run(p1: f64, p2: f64, seed: u32) -> Result<String, JsError> {
        js(super::train_run(p1, p2, seed as u64))
    }
}
