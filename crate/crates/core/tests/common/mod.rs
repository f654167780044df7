#![allow(dead_code)]

use labelnoise::model::{bce_loss, ModelState};
use labelnoise::Label;

/// Central finite differences of the mean BCE loss, one coordinate at a time.
pub fn numeric_gradient(
    model: &ModelState,
    batch: &[&[f64]],
    labels: &[Label],
    h: f64,
) -> Vec<f64> {
    let loss = |m: &ModelState| bce_loss(&m.forward(batch).unwrap(), labels).unwrap();
    let mut probe = model.clone();
    (0..model.params.len())
        .map(|i| {
            let orig = probe.params[i];
            probe.params[i] = orig + h;
            let up = loss(&probe);
            probe.params[i] = orig - h;
            let down = loss(&probe);
            probe.params[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Largest relative error, with a small floor on the denominator so that
/// near-zero coordinates are compared absolutely.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-6))
        .fold(0.0, f64::max)
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}
