//! End-to-end training run: dataset, split, prior noise on the training
//! split, per-epoch label attacks, mini-batch Adam on BCE, early stopping on
//! clean validation accuracy, and clean test evaluation.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::data::{generate_synthetic, load_csv, CsvSchema, SyntheticConfig};
use crate::error::{check_probability, Error, Result};
use crate::example::{split_dataset, DatasetSplit, Label, LabeledExample, SplitFractions};
use crate::metrics::{accuracy, evaluate, EvalResult};
use crate::model::{init_model, ModelKind, ModelSpec, ModelState};
use crate::noise::{
    classify_scenarios, epoch_attack_labels, inject_prior_noise, AttackSpec, NoiseSpec,
    ScenarioCounts,
};
use crate::optim::{adam_step, EarlyStopState, OptimizerConfig, OptimizerState, StopDecision};
use crate::rng::{Purpose, RngStream};

/// Classification threshold behind validation accuracy.
pub const VALIDATION_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[serde(deny_unknown_fields)]
pub enum DataSource {
    Synthetic(SyntheticConfig),
    Csv { path: PathBuf },
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synthetic(SyntheticConfig::default())
    }
}

/// Architecture choice; the feature count comes from the data.
///
/// Without an explicit `init_scale` a logistic model starts from zero and an
/// MLP from Glorot-uniform weights. With a learning rate of 1e-4 a random
/// logistic start is never trained away within the epoch budget and would
/// dominate the learned direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub hidden_units: usize,
    pub init_scale: Option<f64>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            kind: ModelKind::Logistic,
            hidden_units: 32,
            init_scale: None,
        }
    }
}

impl ModelConfig {
    /// Glorot-initialized MLP.
    pub fn mlp(hidden_units: usize) -> Self {
        ModelConfig {
            kind: ModelKind::Mlp,
            hidden_units,
            init_scale: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == ModelKind::Mlp && self.hidden_units == 0 {
            return Err(Error::Config(
                "an mlp needs at least one hidden unit".into(),
            ));
        }
        if self.kind == ModelKind::Mlp && self.init_scale == Some(0.0) {
            // tanh(0) = 0 makes every gradient except the output bias vanish.
            return Err(Error::Config(
                "an mlp cannot start from all-zero weights".into(),
            ));
        }
        self.spec(1).validate()
    }

    pub fn spec(&self, n_features: usize) -> ModelSpec {
        let init_scale = match (self.kind, self.init_scale) {
            (_, Some(s)) => Some(s),
            (ModelKind::Logistic, None) => Some(0.0),
            (ModelKind::Mlp, None) => None,
        };
        ModelSpec {
            kind: self.kind,
            n_features,
            hidden_units: self.hidden_units,
            init_scale,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub data: DataSource,
    pub split: SplitFractions,
    pub model: ModelConfig,
    pub optimizer: OptimizerConfig,
    pub batch_size: usize,
    pub patience: usize,
    pub max_epochs: usize,
    pub noise: NoiseSpec,
    pub attack: AttackSpec,
    pub master_seed: u64,
    /// Ablation: also apply prior noise to validation labels.
    pub corrupt_validation: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            data: DataSource::default(),
            split: SplitFractions::default(),
            model: ModelConfig::default(),
            optimizer: OptimizerConfig::default(),
            batch_size: 16,
            patience: 8,
            max_epochs: 100,
            noise: NoiseSpec::none(),
            attack: AttackSpec::default(),
            master_seed: 0,
            corrupt_validation: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.patience == 0 {
            return Err(Error::Config("patience must be at least 1".into()));
        }
        if self.max_epochs == 0 {
            return Err(Error::Config("max_epochs must be at least 1".into()));
        }
        self.noise.validate()?;
        check_probability("p2", self.attack.p2)?;
        self.optimizer.validate()?;
        self.model.validate()?;
        self.split.validate()?;
        if let DataSource::Synthetic(s) = &self.data {
            s.validate()?;
        }
        Ok(())
    }

    pub fn stream(&self, purpose: Purpose, index: u64) -> RngStream {
        RngStream::derive(self.master_seed, purpose, index)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_accuracy: f64,
    pub scenarios: ScenarioCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub config: TrainConfig,
    pub model_spec: ModelSpec,
    pub n_train: usize,
    pub n_validation: usize,
    pub n_test: usize,
    pub n_prior_corrupted: usize,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    pub stopped_epoch: usize,
    /// Number of epochs actually trained.
    pub n_actual: usize,
    pub test_auc: f64,
    pub test_accuracy: f64,
}

/// Everything a run produces besides the report.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub report: TrainReport,
    pub model: ModelState,
    /// The split after prior noise: train labels may be corrupted,
    /// validation and test labels are clean unless `corrupt_validation`.
    pub split: DatasetSplit,
}

/// Load or generate the clean dataset named by `config.data`.
pub fn load_dataset(config: &TrainConfig) -> Result<Vec<LabeledExample>> {
    match &config.data {
        DataSource::Synthetic(s) => generate_synthetic(s, &mut config.stream(Purpose::DataGen, 0)),
        DataSource::Csv { path } => {
            let mut data = load_csv(path, &CsvSchema::default())?;
            // The file may carry corrupted labels; training starts from clean ones.
            for ex in &mut data {
                let clean = ex.clean_label;
                ex.set_stored_label(clean);
            }
            Ok(data)
        }
    }
}

/// Metrics of `model` on `split` against clean labels.
pub fn evaluate_checkpoint(model: &ModelState, split: &[LabeledExample]) -> Result<EvalResult> {
    if split.is_empty() {
        return Err(Error::invalid("cannot evaluate on an empty split"));
    }
    let rows: Vec<&[f64]> = split.iter().map(|e| e.features.as_slice()).collect();
    let clean: Vec<Label> = split.iter().map(|e| e.clean_label).collect();
    evaluate(&model.forward(&rows)?, &clean)
}

fn validation_accuracy(model: &ModelState, rows: &[&[f64]], labels: &[Label]) -> Result<f64> {
    accuracy(&model.forward(rows)?, labels, VALIDATION_THRESHOLD)
}

pub fn train(config: &TrainConfig) -> Result<TrainReport> {
    Ok(train_full(config)?.report)
}

pub fn train_full(config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let data = load_dataset(config)?;
    let split = split_dataset(&data, config.split, &mut config.stream(Purpose::Shuffle, 0))?;
    train_on_split(config, split)
}

/// Run the training procedure on an already split, still clean dataset.
pub fn train_on_split(config: &TrainConfig, clean_split: DatasetSplit) -> Result<TrainOutcome> {
    config.validate()?;
    let n_features = clean_split
        .train
        .first()
        .map(|e| e.features.len())
        .ok_or_else(|| Error::invalid("empty training split"))?;

    let DatasetSplit {
        train,
        validation,
        test,
        fractions,
    } = clean_split;
    let train = inject_prior_noise(
        &train,
        &config.noise,
        &mut config.stream(Purpose::PriorNoise, 0),
    )?;
    let validation = if config.corrupt_validation {
        inject_prior_noise(
            &validation,
            &config.noise,
            &mut config.stream(Purpose::PriorNoise, 1),
        )?
    } else {
        validation
    };

    let spec = config.model.spec(n_features);
    let mut model = init_model(&spec, &mut config.stream(Purpose::Init, 0))?;
    let mut opt = OptimizerState::new(spec.param_count());
    let mut stopper = EarlyStopState::new(config.patience, config.max_epochs);

    let train_rows: Vec<&[f64]> = train.iter().map(|e| e.features.as_slice()).collect();
    let stored: Vec<Label> = train.iter().map(|e| e.stored_label).collect();
    let prior_corrupted: Vec<bool> = train.iter().map(|e| e.prior_corrupted).collect();
    let val_rows: Vec<&[f64]> = validation.iter().map(|e| e.features.as_slice()).collect();
    let val_labels: Vec<Label> = validation.iter().map(|e| e.stored_label).collect();

    let mut epochs = Vec::new();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut batch_rows: Vec<&[f64]> = Vec::with_capacity(config.batch_size);
    let mut batch_labels: Vec<Label> = Vec::with_capacity(config.batch_size);

    for epoch in 1..=config.max_epochs {
        let attack = epoch_attack_labels(
            &stored,
            &config.attack,
            &mut config.stream(Purpose::EpochAttack, epoch as u64),
        );
        let scenarios = classify_scenarios(&prior_corrupted, &attack.flip_mask)?;

        config
            .stream(Purpose::Shuffle, epoch as u64)
            .shuffle(&mut order);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            batch_rows.clear();
            batch_labels.clear();
            for &i in chunk {
                batch_rows.push(train_rows[i]);
                batch_labels.push(attack.labels[i]);
            }
            let (loss, grad) = model.loss_and_gradient(&batch_rows, &batch_labels)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!("training loss at epoch {epoch}")));
            }
            loss_sum += loss * chunk.len() as f64;
            adam_step(&mut model.params, &mut opt, &grad, &config.optimizer)?;
        }

        let val_accuracy = validation_accuracy(&model, &val_rows, &val_labels)?;
        epochs.push(EpochRecord {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            val_accuracy,
            scenarios,
        });
        if stopper.update(epoch, val_accuracy, &model) == StopDecision::Stop {
            break;
        }
    }

    let stopped_epoch = epochs.len();
    if let Some(best) = stopper.best_checkpoint.take() {
        model = best;
    }
    let test_eval = evaluate_checkpoint(&model, &test)?;

    let report = TrainReport {
        config: config.clone(),
        model_spec: spec,
        n_train: train.len(),
        n_validation: validation.len(),
        n_test: test.len(),
        n_prior_corrupted: prior_corrupted.iter().filter(|&&c| c).count(),
        epochs,
        best_epoch: stopper.best_epoch,
        best_val_accuracy: stopper.best_metric,
        stopped_epoch,
        n_actual: stopped_epoch,
        test_auc: test_eval.auc,
        test_accuracy: test_eval.accuracy,
    };
    Ok(TrainOutcome {
        report,
        model,
        split: DatasetSplit {
            train,
            validation,
            test,
            fractions,
        },
    })
}

impl TrainReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Per-epoch table.
    pub fn epochs_csv(&self) -> String {
        let mut out = String::from(
            "epoch,train_loss,val_accuracy,n_cl_given_cl,n_cl_given_co,n_co_given_cl,n_co_given_co\n",
        );
        for e in &self.epochs {
            let s = &e.scenarios;
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                e.epoch,
                e.train_loss,
                e.val_accuracy,
                s.n_cl_given_cl,
                s.n_cl_given_co,
                s.n_co_given_cl,
                s.n_co_given_co
            ));
        }
        out
    }
}
