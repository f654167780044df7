//! Single-output binary classifiers: logistic regression and a one-hidden-layer
//! tanh MLP, both ending in one sigmoid unit and trained with binary
//! cross-entropy.
//!
//! Parameters live in one flat vector, weights before biases, layer by layer:
//!
//! * logistic: `w[0..d]`, `b`
//! * mlp: `W1[h][d]` (row-major by hidden unit), `b1[h]`, `w2[h]`, `b2`

use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::example::Label;
use crate::rng::RngStream;

/// Probability clamp used inside the loss.
pub const BCE_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    #[default]
    Logistic,
    Mlp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub n_features: usize,
    #[serde(default = "default_hidden")]
    pub hidden_units: usize,
    /// Half-width of the uniform initialization. `None` selects the Glorot
    /// limit `sqrt(6 / (fan_in + fan_out))` per layer.
    #[serde(default)]
    pub init_scale: Option<f64>,
}

fn default_hidden() -> usize {
    32
}

impl ModelSpec {
    pub fn logistic(n_features: usize) -> Self {
        ModelSpec {
            kind: ModelKind::Logistic,
            n_features,
            hidden_units: default_hidden(),
            init_scale: None,
        }
    }

    pub fn mlp(n_features: usize, hidden_units: usize) -> Self {
        ModelSpec {
            kind: ModelKind::Mlp,
            n_features,
            hidden_units,
            init_scale: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_features == 0 {
            return Err(Error::Config("n_features must be at least 1".into()));
        }
        if self.kind == ModelKind::Mlp && self.hidden_units == 0 {
            return Err(Error::Config(
                "an mlp needs at least one hidden unit".into(),
            ));
        }
        if let Some(s) = self.init_scale {
            if !(s.is_finite() && s >= 0.0) {
                return Err(Error::Config(format!(
                    "init_scale must be finite and >= 0, got {s}"
                )));
            }
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        let d = self.n_features;
        match self.kind {
            ModelKind::Logistic => d + 1,
            ModelKind::Mlp => {
                let h = self.hidden_units;
                h * d + h + h + 1
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    pub spec: ModelSpec,
    pub params: Vec<f64>,
}

fn glorot(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Uniform weights in `[-limit, limit]`, zero biases.
pub fn init_model(spec: &ModelSpec, rng: &mut RngStream) -> Result<ModelState> {
    spec.validate()?;
    let d = spec.n_features;
    let mut params = vec![0.0; spec.param_count()];
    let mut fill = |slice: &mut [f64], limit: f64| {
        for w in slice {
            *w = if limit > 0.0 {
                rng.inner().random_range(-limit..=limit)
            } else {
                0.0
            };
        }
    };
    match spec.kind {
        ModelKind::Logistic => {
            let limit = spec.init_scale.unwrap_or_else(|| glorot(d, 1));
            fill(&mut params[..d], limit);
        }
        ModelKind::Mlp => {
            let h = spec.hidden_units;
            let l1 = spec.init_scale.unwrap_or_else(|| glorot(d, h));
            let l2 = spec.init_scale.unwrap_or_else(|| glorot(h, 1));
            fill(&mut params[..h * d], l1);
            fill(&mut params[h * d + h..h * d + 2 * h], l2);
        }
    }
    Ok(ModelState {
        spec: *spec,
        params,
    })
}

impl ModelState {
    /// All-zero parameters: every prediction is 0.5.
    pub fn zeros(spec: &ModelSpec) -> Result<Self> {
        spec.validate()?;
        Ok(ModelState {
            spec: *spec,
            params: vec![0.0; spec.param_count()],
        })
    }

    pub fn from_params(spec: &ModelSpec, params: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        if params.len() != spec.param_count() {
            return Err(Error::DimensionMismatch {
                expected: spec.param_count(),
                got: params.len(),
            });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("model parameter".into()));
        }
        Ok(ModelState {
            spec: *spec,
            params,
        })
    }

    fn check_batch(&self, batch: &[&[f64]]) -> Result<()> {
        let d = self.spec.n_features;
        match batch.iter().find(|row| row.len() != d) {
            Some(row) => Err(Error::DimensionMismatch {
                expected: d,
                got: row.len(),
            }),
            None => Ok(()),
        }
    }

    fn logit(&self, x: &[f64], hidden: &mut Vec<f64>) -> f64 {
        let d = self.spec.n_features;
        let p = &self.params;
        match self.spec.kind {
            ModelKind::Logistic => dot(&p[..d], x) + p[d],
            ModelKind::Mlp => {
                let h = self.spec.hidden_units;
                let (w1, rest) = p.split_at(h * d);
                let (b1, rest) = rest.split_at(h);
                let (w2, b2) = rest.split_at(h);
                hidden.clear();
                hidden.extend((0..h).map(|u| (dot(&w1[u * d..(u + 1) * d], x) + b1[u]).tanh()));
                dot(w2, hidden) + b2[0]
            }
        }
    }

    /// Sigmoid outputs for each row of `batch`.
    pub fn forward(&self, batch: &[&[f64]]) -> Result<Vec<f64>> {
        self.check_batch(batch)?;
        let mut hidden = Vec::new();
        Ok(batch
            .iter()
            .map(|x| sigmoid(self.logit(x, &mut hidden)))
            .collect())
    }

    /// Gradient of `bce_loss(forward(batch), labels)` with respect to every
    /// parameter, in parameter layout.
    pub fn backward(&self, batch: &[&[f64]], labels: &[Label]) -> Result<Vec<f64>> {
        Ok(self.loss_and_gradient(batch, labels)?.1)
    }

    /// Mean BCE over the batch together with its gradient.
    pub fn loss_and_gradient(&self, batch: &[&[f64]], labels: &[Label]) -> Result<(f64, Vec<f64>)> {
        self.check_batch(batch)?;
        if batch.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: batch.len(),
                got: labels.len(),
            });
        }
        if batch.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        let d = self.spec.n_features;
        let scale = 1.0 / batch.len() as f64;
        let mut grad = vec![0.0; self.params.len()];
        let mut hidden = Vec::new();
        let mut loss = 0.0;
        for (x, &y) in batch.iter().zip(labels) {
            let prob = sigmoid(self.logit(x, &mut hidden));
            loss += example_bce(prob, y);
            let dz = (prob - f64::from(y)) * scale;
            match self.spec.kind {
                ModelKind::Logistic => {
                    for (g, xi) in grad[..d].iter_mut().zip(x.iter()) {
                        *g += dz * xi;
                    }
                    grad[d] += dz;
                }
                ModelKind::Mlp => {
                    let h = self.spec.hidden_units;
                    let w2 = &self.params[h * d + h..h * d + 2 * h];
                    let (g_w1, rest) = grad.split_at_mut(h * d);
                    let (g_b1, rest) = rest.split_at_mut(h);
                    let (g_w2, g_b2) = rest.split_at_mut(h);
                    for u in 0..h {
                        g_w2[u] += dz * hidden[u];
                        let da = dz * w2[u] * (1.0 - hidden[u] * hidden[u]);
                        g_b1[u] += da;
                        for (g, xi) in g_w1[u * d..(u + 1) * d].iter_mut().zip(x.iter()) {
                            *g += da * xi;
                        }
                    }
                    g_b2[0] += dz;
                }
            }
        }
        Ok((loss * scale, grad))
    }

    /// Write a checkpoint: a header line, the spec as JSON, then one
    /// parameter per line.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = String::from("labelnoise-checkpoint v1\n");
        text.push_str(&serde_json::to_string(&self.spec)?);
        text.push('\n');
        for p in &self.params {
            text.push_str(&format!("{p}\n"));
        }
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines();
        if lines.next() != Some("labelnoise-checkpoint v1") {
            return Err(Error::invalid(format!(
                "{}: not a checkpoint file",
                path.display()
            )));
        }
        let spec: ModelSpec = serde_json::from_str(lines.next().unwrap_or_default())?;
        let params = lines
            .map(|l| {
                l.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::invalid(format!("{}: bad parameter `{l}`", path.display())))
            })
            .collect::<Result<Vec<f64>>>()?;
        Self::from_params(&spec, params)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn example_bce(prob: f64, label: Label) -> f64 {
    let p = prob.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
    if label == 1 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// Mean binary cross-entropy with probabilities clamped to
/// `[BCE_CLAMP, 1 - BCE_CLAMP]`.
pub fn bce_loss(probabilities: &[f64], labels: &[Label]) -> Result<f64> {
    if probabilities.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: probabilities.len(),
            got: labels.len(),
        });
    }
    if probabilities.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let total: f64 = probabilities
        .iter()
        .zip(labels)
        .map(|(&p, &y)| example_bce(p, y))
        .sum();
    Ok(total / probabilities.len() as f64)
}
