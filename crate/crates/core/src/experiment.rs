//! Noise-rate sweeps and the flip-probability utility behind the CLI.
//!
//! Three sweep shapes are supported:
//!
//! * `prior_only`: prior flip rate `p1` varies, no epoch attack.
//! * `attack_only`: epoch attack rate `p2` varies on clean labels.
//! * `combined`: every `p1` is run with each attack rate and with `p2 = 0`;
//!   the difference of the two mean AUCs is reported as `auc_gain`.
//!
//! For a fixed seed and `p1` the training split and its corrupted labels are
//! identical in every cell, so attacked and unattacked runs see the same
//! noisy labels.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::binom::{derive_p2, estimate_epoch_count, majority_threshold, BinomialDerivation};
use crate::error::{check_probability, Error, Result};
use crate::noise::{AttackSpec, NoiseSpec};
use crate::trainer::{train, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    PriorOnly,
    AttackOnly,
    Combined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub kind: SweepKind,
    #[serde(default)]
    pub p1_values: Vec<f64>,
    #[serde(default)]
    pub p2_values: Vec<f64>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Settings shared by every cell; its noise, attack and seed fields are
    /// overwritten per cell.
    #[serde(default)]
    pub base: TrainConfig,
}

impl SweepSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: SweepSpec = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("a sweep needs at least one seed".into()));
        }
        for &p in &self.p1_values {
            check_probability("p1", p)?;
        }
        for &p in &self.p2_values {
            check_probability("p2", p)?;
        }
        match self.kind {
            SweepKind::PriorOnly if self.p1_values.is_empty() => {
                Err(Error::Config("prior_only sweep needs p1_values".into()))
            }
            SweepKind::AttackOnly if self.p2_values.is_empty() => {
                Err(Error::Config("attack_only sweep needs p2_values".into()))
            }
            SweepKind::Combined if self.p1_values.is_empty() || self.p2_values.is_empty() => Err(
                Error::Config("combined sweep needs p1_values and p2_values".into()),
            ),
            _ => self.base.validate(),
        }
    }

    /// The `(p1, p2)` cells of the sweep in output order.
    pub fn cells(&self) -> Vec<(f64, f64)> {
        let mut cells = match self.kind {
            SweepKind::PriorOnly => self.p1_values.iter().map(|&p1| (p1, 0.0)).collect(),
            SweepKind::AttackOnly => self.p2_values.iter().map(|&p2| (0.0, p2)).collect(),
            SweepKind::Combined => {
                let mut cells = Vec::new();
                for &p1 in &self.p1_values {
                    cells.push((p1, 0.0));
                    cells.extend(self.p2_values.iter().map(|&p2| (p1, p2)));
                }
                cells
            }
        };
        cells.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        cells.dedup();
        cells
    }

    pub fn cell_config(&self, p1: f64, p2: f64, seed: u64) -> TrainConfig {
        let mut config = self.base.clone();
        config.noise = NoiseSpec {
            p_p: p1,
            p_n: p1,
            mode: self.base.noise.mode,
        };
        config.attack = AttackSpec { p2 };
        config.master_seed = seed;
        config
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub p1: f64,
    pub p2: f64,
    pub seed: u64,
    pub test_auc: f64,
    pub test_accuracy: f64,
    pub stopped_epoch: usize,
    pub best_epoch: usize,
    /// Set when the cell failed; the metrics are then NaN.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAggregate {
    pub p1: f64,
    pub p2: f64,
    pub n_runs: usize,
    pub n_failed: usize,
    pub mean_auc: f64,
    pub std_auc: f64,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub mean_stopped_epoch: f64,
    /// Combined sweeps only: `mean_auc` minus the mean AUC of the same `p1`
    /// without attack.
    pub auc_gain: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub spec: SweepSpec,
    pub rows: Vec<SweepRow>,
    pub aggregates: Vec<SweepAggregate>,
}

fn run_cell(spec: &SweepSpec, p1: f64, p2: f64, seed: u64) -> SweepRow {
    match train(&spec.cell_config(p1, p2, seed)) {
        Ok(report) => SweepRow {
            p1,
            p2,
            seed,
            test_auc: report.test_auc,
            test_accuracy: report.test_accuracy,
            stopped_epoch: report.stopped_epoch,
            best_epoch: report.best_epoch,
            error: None,
        },
        Err(e) => SweepRow {
            p1,
            p2,
            seed,
            test_auc: f64::NAN,
            test_accuracy: f64::NAN,
            stopped_epoch: 0,
            best_epoch: 0,
            error: Some(e.to_string()),
        },
    }
}

/// Mean and sample standard deviation (0 for a single value).
fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn aggregate(kind: SweepKind, rows: &[SweepRow]) -> Vec<SweepAggregate> {
    let mut groups: BTreeMap<(u64, u64), Vec<&SweepRow>> = BTreeMap::new();
    for row in rows {
        groups
            .entry((row.p1.to_bits(), row.p2.to_bits()))
            .or_default()
            .push(row);
    }
    let mut out: Vec<SweepAggregate> = groups
        .into_values()
        .map(|group| {
            let ok: Vec<&&SweepRow> = group.iter().filter(|r| r.error.is_none()).collect();
            let aucs: Vec<f64> = ok.iter().map(|r| r.test_auc).collect();
            let accs: Vec<f64> = ok.iter().map(|r| r.test_accuracy).collect();
            let epochs: Vec<f64> = ok.iter().map(|r| r.stopped_epoch as f64).collect();
            let (mean_auc, std_auc) = mean_std(&aucs);
            let (mean_accuracy, std_accuracy) = mean_std(&accs);
            SweepAggregate {
                p1: group[0].p1,
                p2: group[0].p2,
                n_runs: group.len(),
                n_failed: group.len() - ok.len(),
                mean_auc,
                std_auc,
                mean_accuracy,
                std_accuracy,
                mean_stopped_epoch: mean_std(&epochs).0,
                auc_gain: None,
            }
        })
        .collect();
    out.sort_by(|a, b| a.p1.total_cmp(&b.p1).then(a.p2.total_cmp(&b.p2)));

    if kind == SweepKind::Combined {
        let reference: BTreeMap<u64, f64> = out
            .iter()
            .filter(|a| a.p2 == 0.0)
            .map(|a| (a.p1.to_bits(), a.mean_auc))
            .collect();
        for agg in out.iter_mut().filter(|a| a.p2 != 0.0) {
            agg.auc_gain = reference.get(&agg.p1.to_bits()).map(|r| agg.mean_auc - r);
        }
    }
    out
}

/// Train every `(p1, p2, seed)` cell. Failed cells are recorded, not fatal.
/// Rows come back sorted by `(p1, p2, seed)` whatever order cells finish in.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let jobs: Vec<(f64, f64, u64)> = spec
        .cells()
        .into_iter()
        .flat_map(|(p1, p2)| spec.seeds.iter().map(move |&s| (p1, p2, s)))
        .collect();

    #[cfg(feature = "parallel")]
    let mut rows: Vec<SweepRow> = {
        use rayon::prelude::*;
        jobs.par_iter()
            .map(|&(p1, p2, seed)| run_cell(spec, p1, p2, seed))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let mut rows: Vec<SweepRow> = jobs
        .iter()
        .map(|&(p1, p2, seed)| run_cell(spec, p1, p2, seed))
        .collect();

    rows.sort_by(|a, b| {
        a.p1.total_cmp(&b.p1)
            .then(a.p2.total_cmp(&b.p2))
            .then(a.seed.cmp(&b.seed))
    });
    rows.dedup_by(|a, b| a.p1 == b.p1 && a.p2 == b.p2 && a.seed == b.seed);
    let aggregates = aggregate(spec.kind, &rows);
    Ok(SweepResult {
        spec: spec.clone(),
        rows,
        aggregates,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl SweepResult {
    /// One row per run, long format.
    pub fn rows_csv(&self) -> String {
        let mut out =
            String::from("p1,p2,seed,test_auc,test_accuracy,stopped_epoch,best_epoch,error\n");
        for r in &self.rows {
            let err = r.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.p1, r.p2, r.seed, r.test_auc, r.test_accuracy, r.stopped_epoch, r.best_epoch, err
            ));
        }
        out
    }

    /// One row per `(p1, p2)` cell.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from(
            "p1,p2,n_runs,n_failed,mean_auc,std_auc,mean_accuracy,std_accuracy,mean_stopped_epoch,auc_gain\n",
        );
        for a in &self.aggregates {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                a.p1,
                a.p2,
                a.n_runs,
                a.n_failed,
                a.mean_auc,
                a.std_auc,
                a.mean_accuracy,
                a.std_accuracy,
                a.mean_stopped_epoch,
                opt(a.auc_gain)
            ));
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn aggregate(&self, p1: f64, p2: f64) -> Option<&SweepAggregate> {
        self.aggregates.iter().find(|a| a.p1 == p1 && a.p2 == p2)
    }

    /// Wide text table: one column per swept probability.
    pub fn table(&self) -> String {
        let shown: Vec<&SweepAggregate> = match self.spec.kind {
            SweepKind::Combined => self.aggregates.iter().filter(|a| a.p2 != 0.0).collect(),
            _ => self.aggregates.iter().collect(),
        };
        let (label, key): (&str, fn(&SweepAggregate) -> f64) = match self.spec.kind {
            SweepKind::AttackOnly => ("p2", |a| a.p2),
            _ => ("p1", |a| a.p1),
        };
        let mut header = format!("{label:<10}");
        let mut auc = format!("{:<10}", "AUC");
        let mut gain = format!("{:<10}", "AUC gain");
        for a in &shown {
            header.push_str(&format!("{:>9}", format!("{:.2}", key(a))));
            auc.push_str(&format!("{:>9.3}", a.mean_auc));
            gain.push_str(&format!("{:>+9.3}", a.auc_gain.unwrap_or(f64::NAN)));
        }
        let mut out = format!("{header}\n{auc}\n");
        if self.spec.kind == SweepKind::Combined {
            let p2s: Vec<String> = self.spec.p2_values.iter().map(|p| p.to_string()).collect();
            out.push_str(&format!("{gain}\n(p2 = {})\n", p2s.join(", ")));
        }
        out
    }

    /// Write the rows CSV to `path`, plus `<stem>.summary.csv` and
    /// `<stem>.json` (spec, rows and aggregates) next to it.
    pub fn write(&self, path: &Path) -> Result<Vec<PathBuf>> {
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "sweep".into());
        let summary = path.with_file_name(format!("{stem}.summary.csv"));
        let json = path.with_file_name(format!("{stem}.json"));
        fs::write(path, self.rows_csv()).map_err(|e| Error::io(path, e))?;
        fs::write(&summary, self.summary_csv()).map_err(|e| Error::io(&summary, e))?;
        fs::write(&json, self.to_json()?).map_err(|e| Error::io(&json, e))?;
        Ok(vec![path.to_path_buf(), summary, json])
    }
}

/// Where the epoch count for a derivation comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum EpochSource {
    Explicit(u64),
    /// Lengths of past runs; their rounded mean is used.
    History(Vec<u64>),
}

/// Result of the `derive-p2` utility.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct P2Summary {
    pub derivation: BinomialDerivation,
    /// Run lengths the epoch count was estimated from, if any.
    pub history: Option<Vec<u64>>,
}

/// Derive `p2` from anchors `k1`/`k2` and an epoch count. `k2` defaults to
/// `ceil(n / 2)`.
pub fn derive_p2_from(k1: u64, k2: Option<u64>, source: EpochSource) -> Result<P2Summary> {
    let (n, history) = match source {
        EpochSource::Explicit(n) => (n, None),
        EpochSource::History(h) => (estimate_epoch_count(&h)?, Some(h)),
    };
    let k2 = k2.unwrap_or_else(|| majority_threshold(n));
    Ok(P2Summary {
        derivation: derive_p2(k1, k2, n)?,
        history,
    })
}

/// Parse a run-history file: integers separated by whitespace or commas,
/// `#` starts a comment.
pub fn parse_history(text: &str) -> Result<Vec<u64>> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(|l| l.split(|c: char| c == ',' || c.is_whitespace()))
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<u64>()
                .map_err(|_| Error::invalid(format!("run history: `{t}` is not an epoch count")))
        })
        .collect()
}

impl P2Summary {
    pub fn render(&self) -> String {
        let d = &self.derivation;
        let mut out = String::new();
        if let Some(h) = &self.history {
            out.push_str(&format!("history                 {h:?}\n"));
        }
        out.push_str(&format!("n                       {}\n", d.n));
        out.push_str(&format!("k1                      {}\n", d.k1));
        out.push_str(&format!("k2                      {}\n", d.k2));
        out.push_str(&format!("mu                      {}\n", d.mu));
        out.push_str(&format!("p2                      {}\n", d.p2));
        out.push_str(&format!(
            "P(never flipped)        {:.6e}\n",
            d.prob_never_flipped
        ));
        out.push_str(&format!(
            "P(flipped >= {:>2} times)  {:.6}\n",
            majority_threshold(d.n),
            d.prob_majority_flipped
        ));
        out.push_str(&format!(
            "|B(k1) - B(k2)|         {:.6e}\n",
            d.anchor_residual
        ));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SyntheticConfig;
    use crate::trainer::DataSource;

    fn small_base() -> TrainConfig {
        TrainConfig {
            data: DataSource::Synthetic(SyntheticConfig {
                n_examples: 200,
                n_features: 4,
                ..Default::default()
            }),
            max_epochs: 20,
            ..Default::default()
        }
    }

    #[test]
    fn combined_cells_include_reference() {
        let spec = SweepSpec {
            kind: SweepKind::Combined,
            p1_values: vec![0.3, 0.1],
            p2_values: vec![0.25],
            seeds: vec![0],
            output: None,
            base: small_base(),
        };
        assert_eq!(
            spec.cells(),
            vec![(0.1, 0.0), (0.1, 0.25), (0.3, 0.0), (0.3, 0.25)]
        );
    }

    #[test]
    fn validation_errors() {
        let mut spec = SweepSpec {
            kind: SweepKind::PriorOnly,
            p1_values: vec![0.1],
            p2_values: vec![],
            seeds: vec![],
            output: None,
            base: small_base(),
        };
        assert!(spec.validate().is_err());
        spec.seeds = vec![1];
        assert!(spec.validate().is_ok());
        spec.p1_values = vec![1.5];
        assert!(spec.validate().is_err());
        spec.p1_values = vec![];
        assert!(spec.validate().is_err());
    }

    #[test]
    fn failed_cells_are_recorded() {
        let mut base = small_base();
        base.data = DataSource::Csv {
            path: "/nonexistent/data.csv".into(),
        };
        let spec = SweepSpec {
            kind: SweepKind::PriorOnly,
            p1_values: vec![0.0, 0.2],
            p2_values: vec![],
            seeds: vec![1, 2],
            output: None,
            base,
        };
        let result = run_sweep(&spec).unwrap();
        assert_eq!(result.rows.len(), 4);
        assert!(result
            .rows
            .iter()
            .all(|r| r.error.is_some() && r.test_auc.is_nan()));
        assert!(result.aggregates.iter().all(|a| a.n_failed == 2));
    }

    #[test]
    fn toml_spec_parses() {
        let spec = SweepSpec::from_toml(
            r#"
            kind = "combined"
            p1_values = [0.1, 0.2]
            p2_values = [0.25]
            seeds = [0, 1, 2]
            output = "out.csv"

            [base]
            max_epochs = 50
            noise = { p_p = 0.0, p_n = 0.0, mode = "exact_count" }

            [base.model]
            kind = "mlp"
            hidden_units = 8

            [base.data]
            kind = "synthetic"
            n_examples = 400
            "#,
        )
        .unwrap();
        assert_eq!(spec.kind, SweepKind::Combined);
        assert_eq!(spec.base.max_epochs, 50);
        assert_eq!(spec.base.batch_size, 16);
        assert_eq!(spec.base.model.hidden_units, 8);
        assert_eq!(
            spec.cell_config(0.2, 0.25, 1).noise.mode,
            crate::noise::NoiseMode::ExactCount
        );
        match &spec.base.data {
            DataSource::Synthetic(s) => assert_eq!((s.n_examples, s.n_features), (400, 16)),
            other => panic!("{other:?}"),
        }
        assert!(SweepSpec::from_toml("kind = \"bogus\"\nseeds = [1]").is_err());
    }

    #[test]
    fn history_parsing_and_derivation() {
        assert_eq!(
            parse_history("18, 18\n# comment\n17 19").unwrap(),
            vec![18, 18, 17, 19]
        );
        assert!(parse_history("18 x").is_err());
        let s = derive_p2_from(0, None, EpochSource::History(vec![18, 18])).unwrap();
        assert_eq!(
            (s.derivation.n, s.derivation.k2, s.derivation.p2),
            (18, 9, 0.25)
        );
        let s = derive_p2_from(0, Some(10), EpochSource::Explicit(10)).unwrap();
        assert_eq!(s.derivation.p2, 0.5);
        assert_eq!(s.derivation.prob_never_flipped, 2f64.powi(-10));
        assert!(derive_p2_from(0, None, EpochSource::History(vec![])).is_err());
        assert!(s.render().contains("p2                      0.5"));
    }
}
