use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use labelnoise::data::{
    generate_synthetic, load_csv, write_corrupted_csv, write_csv, write_flip_mask_csv, CsvSchema,
    SyntheticConfig, CALIBRATED_SEPARATION,
};
use labelnoise::experiment::{derive_p2_from, parse_history, run_sweep, EpochSource, SweepSpec};
use labelnoise::model::ModelKind;
use labelnoise::noise::{inject_prior_noise, AttackSpec, NoiseMode, NoiseSpec};
use labelnoise::trainer::{train_full, DataSource, TrainConfig};
use labelnoise::{Error, Purpose, Result, RngStream};

#[derive(Parser)]
#[command(
    name = "labelnoise",
    version,
    about = "Label-noise experiments for binary classifiers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic two-Gaussian dataset as CSV.
    Generate(GenerateArgs),
    /// Apply prior label noise to a dataset CSV.
    Inject(InjectArgs),
    /// Derive the epoch-wise flip probability from flip-count anchors.
    DeriveP2(DeriveArgs),
    /// Train one model and write its report.
    Train(Box<TrainArgs>),
    /// Run a noise-rate sweep described by a TOML file.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct SyntheticArgs {
    #[arg(long, default_value_t = 800)]
    n_examples: usize,
    #[arg(long, default_value_t = 16)]
    n_features: usize,
    #[arg(long, default_value_t = CALIBRATED_SEPARATION)]
    separation: f64,
    #[arg(long, default_value_t = 0.5)]
    positive_fraction: f64,
}

impl SyntheticArgs {
    fn config(&self) -> SyntheticConfig {
        SyntheticConfig {
            n_examples: self.n_examples,
            n_features: self.n_features,
            class_separation: self.separation,
            positive_fraction: self.positive_fraction,
        }
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    synthetic: SyntheticArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Bernoulli,
    ExactCount,
}

impl From<ModeArg> for NoiseMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Bernoulli => NoiseMode::Bernoulli,
            ModeArg::ExactCount => NoiseMode::ExactCount,
        }
    }
}

#[derive(Args)]
struct NoiseArgs {
    /// Symmetric prior flip probability (sets both --pp and --pn).
    #[arg(long)]
    p1: Option<f64>,
    /// Flip probability for positive labels.
    #[arg(long)]
    pp: Option<f64>,
    /// Flip probability for negative labels.
    #[arg(long)]
    pn: Option<f64>,
    #[arg(long, value_enum)]
    noise_mode: Option<ModeArg>,
}

impl NoiseArgs {
    fn apply(&self, spec: &mut NoiseSpec) {
        if let Some(p) = self.p1 {
            spec.p_p = p;
            spec.p_n = p;
        }
        if let Some(p) = self.pp {
            spec.p_p = p;
        }
        if let Some(p) = self.pn {
            spec.p_n = p;
        }
        if let Some(m) = self.noise_mode {
            spec.mode = m.into();
        }
    }
}

#[derive(Args)]
struct InjectArgs {
    #[arg(long, short)]
    input: PathBuf,
    #[command(flatten)]
    noise: NoiseArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Corrupted dataset (adds clean_label and prior_corrupted columns).
    #[arg(long, short)]
    out: PathBuf,
    /// Flip-mask table: id, clean_label, stored_label, prior_corrupted.
    #[arg(long)]
    mask_out: Option<PathBuf>,
}

#[derive(Args)]
struct DeriveArgs {
    #[arg(long, default_value_t = 0)]
    k1: u64,
    /// Upper anchor; defaults to ceil(n / 2).
    #[arg(long)]
    k2: Option<u64>,
    /// Epoch count.
    #[arg(long, conflicts_with = "history", required_unless_present = "history")]
    n: Option<u64>,
    /// File of past run lengths; their rounded mean becomes n.
    #[arg(long)]
    history: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Logistic,
    Mlp,
}

#[derive(Args)]
struct TrainArgs {
    /// TOML file with a full training config; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Train on a CSV dataset instead of synthetic data.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    n_examples: Option<usize>,
    #[arg(long)]
    n_features: Option<usize>,
    #[arg(long)]
    separation: Option<f64>,
    #[command(flatten)]
    noise: NoiseArgs,
    /// Epoch-wise flip probability.
    #[arg(long)]
    p2: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    model: Option<KindArg>,
    #[arg(long)]
    hidden_units: Option<usize>,
    #[arg(long)]
    init_scale: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    max_epochs: Option<usize>,
    /// JSON report path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-epoch CSV table.
    #[arg(long)]
    epochs_out: Option<PathBuf>,
    /// Best-epoch model checkpoint.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep description (TOML).
    config: PathBuf,
    /// Results CSV; overrides `output` in the config.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn generate(args: GenerateArgs) -> Result<()> {
    let mut rng = RngStream::derive(args.seed, Purpose::DataGen, 0);
    let data = generate_synthetic(&args.synthetic.config(), &mut rng)?;
    write_csv(&data, &args.out)?;
    eprintln!("wrote {} examples to {}", data.len(), args.out.display());
    Ok(())
}

fn inject(args: InjectArgs) -> Result<()> {
    let mut data = load_csv(&args.input, &CsvSchema::default())?;
    for ex in &mut data {
        let clean = ex.clean_label;
        ex.set_stored_label(clean);
    }
    let mut spec = NoiseSpec::none();
    args.noise.apply(&mut spec);
    let out = inject_prior_noise(
        &data,
        &spec,
        &mut RngStream::derive(args.seed, Purpose::PriorNoise, 0),
    )?;
    write_corrupted_csv(&out, &args.out)?;
    if let Some(mask) = &args.mask_out {
        write_flip_mask_csv(&out, mask)?;
    }
    let flipped = out.iter().filter(|e| e.prior_corrupted).count();
    eprintln!("flipped {flipped} of {} labels", out.len());
    Ok(())
}

fn derive(args: DeriveArgs) -> Result<()> {
    let source = match (&args.history, args.n) {
        (Some(path), _) => EpochSource::History(parse_history(&read(path)?)?),
        (None, Some(n)) => EpochSource::Explicit(n),
        (None, None) => return Err(Error::InvalidArgument("give --n or --history".into())),
    };
    let summary = derive_p2_from(args.k1, args.k2, source)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&summary)?);
    } else {
        print!("{}", summary.render());
    }
    Ok(())
}

fn train_cmd(args: TrainArgs) -> Result<()> {
    let mut config = match &args.config {
        Some(path) => toml::from_str(&read(path)?).map_err(|e| Error::Config(e.to_string()))?,
        None => TrainConfig::default(),
    };
    if let Some(path) = &args.data {
        config.data = DataSource::Csv { path: path.clone() };
    }
    if let DataSource::Synthetic(s) = &mut config.data {
        if let Some(v) = args.n_examples {
            s.n_examples = v;
        }
        if let Some(v) = args.n_features {
            s.n_features = v;
        }
        if let Some(v) = args.separation {
            s.class_separation = v;
        }
    }
    args.noise.apply(&mut config.noise);
    if let Some(p2) = args.p2 {
        config.attack = AttackSpec { p2 };
    }
    if let Some(v) = args.seed {
        config.master_seed = v;
    }
    if let Some(k) = args.model {
        config.model.kind = match k {
            KindArg::Logistic => ModelKind::Logistic,
            KindArg::Mlp => ModelKind::Mlp,
        };
    }
    if let Some(v) = args.hidden_units {
        config.model.hidden_units = v;
    }
    if args.init_scale.is_some() {
        config.model.init_scale = args.init_scale;
    }
    if let Some(v) = args.lr {
        config.optimizer.learning_rate = v;
    }
    if let Some(v) = args.batch_size {
        config.batch_size = v;
    }
    if let Some(v) = args.patience {
        config.patience = v;
    }
    if let Some(v) = args.max_epochs {
        config.max_epochs = v;
    }

    let outcome = train_full(&config)?;
    let report = &outcome.report;
    let json = report.to_json()?;
    match &args.out {
        Some(path) => write(path, &json)?,
        None => print!("{json}"),
    }
    if let Some(path) = &args.epochs_out {
        write(path, &report.epochs_csv())?;
    }
    if let Some(path) = &args.checkpoint {
        outcome.model.save(path)?;
    }
    eprintln!(
        "test AUC {:.4}  accuracy {:.4}  best epoch {}  stopped at {}",
        report.test_auc, report.test_accuracy, report.best_epoch, report.stopped_epoch
    );
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<()> {
    let mut spec = SweepSpec::load(&args.config)?;
    if args.out.is_some() {
        spec.output = args.out;
    }
    let result = run_sweep(&spec)?;
    match &spec.output {
        Some(path) => {
            for written in result.write(path)? {
                eprintln!("wrote {}", written.display());
            }
        }
        None => print!("{}", result.rows_csv()),
    }
    eprint!("{}", result.table());
    let failed: usize = result.aggregates.iter().map(|a| a.n_failed).sum();
    if failed > 0 {
        eprintln!("{failed} cell(s) failed; see the error column");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Inject(a) => inject(a),
        Command::DeriveP2(a) => derive(a),
        Command::Train(a) => train_cmd(*a),
        Command::Sweep(a) => sweep(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
