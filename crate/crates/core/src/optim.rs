//! Adam with bias-corrected moments, and patience-based early stopping that
//! keeps the best checkpoint.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Config(format!("{name} must lie in [0, 1), got {b}")));
            }
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!(
                "epsilon must be >= 0, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl OptimizerState {
    pub fn new(n_params: usize) -> Self {
        OptimizerState {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }
}

/// One Adam update of `params` in place.
///
/// ```text
/// m <- b1 m + (1 - b1) g          m_hat = m / (1 - b1^t)
/// v <- b2 v + (1 - b2) g^2        v_hat = v / (1 - b2^t)
/// theta <- theta - lr m_hat / (sqrt(v_hat) + eps)
/// ```
///
/// A non-finite gradient leaves both `params` and `state` untouched.
pub fn adam_step(
    params: &mut [f64],
    state: &mut OptimizerState,
    gradients: &[f64],
    config: &OptimizerConfig,
) -> Result<()> {
    let n = params.len();
    if gradients.len() != n || state.m.len() != n || state.v.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: gradients.len().min(state.m.len()).min(state.v.len()),
        });
    }
    if let Some(i) = gradients.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite(format!(
            "gradient coordinate {i} is {} at step {}",
            gradients[i],
            state.t + 1
        )));
    }
    state.t += 1;
    let t = state.t as i32;
    let bias1 = 1.0 - config.beta1.powi(t);
    let bias2 = 1.0 - config.beta2.powi(t);
    for i in 0..n {
        let g = gradients[i];
        state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g;
        state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * g * g;
        let m_hat = state.m[i] / bias1;
        let v_hat = state.v[i] / bias2;
        params[i] -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopDecision {
    Continue,
    Stop,
}

/// Tracks the best validation metric. Improvement is strict, ties count
/// as stagnation, and the counter measures consecutive stagnant epochs.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopState {
    pub best_metric: f64,
    pub best_epoch: usize,
    pub best_checkpoint: Option<ModelState>,
    pub epochs_since_improvement: usize,
    pub patience: usize,
    pub max_epochs: usize,
}

impl EarlyStopState {
    pub fn new(patience: usize, max_epochs: usize) -> Self {
        EarlyStopState {
            best_metric: f64::NEG_INFINITY,
            best_epoch: 0,
            best_checkpoint: None,
            epochs_since_improvement: 0,
            patience,
            max_epochs,
        }
    }

    /// Record epoch `epoch` (1-based). On `Stop` the caller restores
    /// `best_checkpoint`.
    pub fn update(
        &mut self,
        epoch: usize,
        val_metric: f64,
        checkpoint: &ModelState,
    ) -> StopDecision {
        if val_metric > self.best_metric {
            self.best_metric = val_metric;
            self.best_epoch = epoch;
            self.best_checkpoint = Some(checkpoint.clone());
            self.epochs_since_improvement = 0;
        } else {
            self.epochs_since_improvement += 1;
        }
        if self.epochs_since_improvement >= self.patience || epoch >= self.max_epochs {
            StopDecision::Stop
        } else {
            StopDecision::Continue
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelSpec;

    /// Scalar Adam written out independently for one coordinate.
    fn scalar_adam(theta0: f64, grads: &[f64], lr: f64, b1: f64, b2: f64, eps: f64) -> Vec<f64> {
        let (mut theta, mut m, mut v) = (theta0, 0.0f64, 0.0f64);
        let mut b1t = 1.0;
        let mut b2t = 1.0;
        let mut out = Vec::new();
        for &g in grads {
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            b1t *= b1;
            b2t *= b2;
            theta -= lr * (m / (1.0 - b1t)) / ((v / (1.0 - b2t)).sqrt() + eps);
            out.push(theta);
        }
        out
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let cfg = OptimizerConfig::default();
        for g in [1e-3, 0.5, -2.0, 1e4] {
            let mut p = vec![1.0, -1.0];
            let mut s = OptimizerState::new(2);
            adam_step(&mut p, &mut s, &[g, g], &cfg).unwrap();
            let step = (p[0] - 1.0).abs();
            let want = cfg.learning_rate * g.abs() / (g.abs() + cfg.epsilon);
            assert!((step - want).abs() < 1e-15, "g={g}: {step}");
            let rel = (step - cfg.learning_rate).abs() / cfg.learning_rate;
            assert!(rel <= cfg.epsilon / g.abs() + 1e-10, "g={g}: rel {rel}");
            assert_eq!(s.t, 1);
        }
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = vec![0.3, -0.7];
        let mut s = OptimizerState::new(2);
        adam_step(&mut p, &mut s, &[0.0, 0.0], &OptimizerConfig::default()).unwrap();
        assert_eq!(p, vec![0.3, -0.7]);
    }

    #[test]
    fn five_steps_match_scalar_recurrence() {
        let cfg = OptimizerConfig {
            learning_rate: 0.01,
            ..Default::default()
        };
        let grads = [0.3, -1.2, 0.05, 2.0, -0.4];
        let want = scalar_adam(
            0.5,
            &grads,
            cfg.learning_rate,
            cfg.beta1,
            cfg.beta2,
            cfg.epsilon,
        );
        let mut p = vec![0.5];
        let mut s = OptimizerState::new(1);
        for (g, w) in grads.iter().zip(&want) {
            adam_step(&mut p, &mut s, &[*g], &cfg).unwrap();
            assert!((p[0] - w).abs() < 1e-12);
        }
        assert_eq!(s.t, 5);
        assert!(s.v.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let mut p = vec![1.0];
        let mut s = OptimizerState::new(1);
        let err = adam_step(&mut p, &mut s, &[f64::NAN], &OptimizerConfig::default()).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
        assert_eq!((p[0], s.t), (1.0, 0));
    }

    fn ckpt(tag: f64) -> ModelState {
        ModelState::from_params(&ModelSpec::logistic(1), vec![tag, 0.0]).unwrap()
    }

    #[test]
    fn stops_after_patience_stagnant_epochs() {
        let mut es = EarlyStopState::new(8, 100);
        let mut stopped = None;
        for epoch in 1..=20 {
            let metric = if epoch == 1 { 0.8 } else { 0.7 };
            if es.update(epoch, metric, &ckpt(epoch as f64)) == StopDecision::Stop {
                stopped = Some(epoch);
                break;
            }
        }
        assert_eq!(stopped, Some(9));
        assert_eq!(es.best_epoch, 1);
        assert_eq!(es.best_checkpoint.unwrap().params[0], 1.0);
    }

    #[test]
    fn increasing_metric_runs_to_max_epochs() {
        let mut es = EarlyStopState::new(8, 30);
        let mut last = 0;
        for epoch in 1..=100 {
            last = epoch;
            if es.update(epoch, epoch as f64, &ckpt(0.0)) == StopDecision::Stop {
                break;
            }
        }
        assert_eq!(last, 30);
        assert_eq!(es.best_epoch, 30);
    }

    #[test]
    fn ties_do_not_reset_patience() {
        let mut es = EarlyStopState::new(2, 100);
        assert_eq!(es.update(1, 0.5, &ckpt(1.0)), StopDecision::Continue);
        assert_eq!(es.update(2, 0.5, &ckpt(2.0)), StopDecision::Continue);
        assert_eq!(es.update(3, 0.5, &ckpt(3.0)), StopDecision::Stop);
        assert_eq!(es.best_epoch, 1);
    }
}
