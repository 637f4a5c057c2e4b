use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use collneg::datasets::{self, feature_matrix, negativities, Dataset, DatasetFormat};
use collneg::models::mlp::{self, MlpModel, TrainConfig, MODEL_MAGIC};
use collneg::models::{Metrics, QuadraticModel};
use collneg::report::{fraction_below, results_table, scatter_csv, Histogram, MetricsRecord, ModelKind};
use ndarray::Array1;

const DEFAULT_SEED: u64 = 0xC011EC7;

#[derive(Parser)]
#[command(name = "collneg", version, about = "Negativity of two-qubit states from collective measurements")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate random states with their ten collective probabilities and negativity.
    Generate(GenerateArgs),
    /// Fit the quadratic regression model and score it on a test set.
    FitReg(FitRegArgs),
    /// Train the neural network on N² labels and score it on a test set.
    TrainAnn(TrainAnnArgs),
    /// Score a saved model on a dataset; optionally write scatter and residual data.
    Eval(EvalArgs),
    /// Predict negativity for feature rows read from stdin.
    Predict(PredictArgs),
    /// Combine metrics files into one table ordered by B.
    Report(ReportArgs),
}

#[derive(Args)]
struct SeedArg {
    /// Master seed, decimal or 0x-prefixed hex [default: 0xC011EC7]
    #[arg(long, env = "COLLNEG_SEED", value_parser = parse_seed)]
    seed: Option<u64>,
}

impl SeedArg {
    fn get(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Bin,
}

#[derive(Args)]
struct GenerateArgs {
    /// Number of states
    #[arg(long)]
    n: u64,
    #[command(flatten)]
    seed: SeedArg,
    /// Output file
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "bin")]
    format: Format,
    /// Worker threads; 0 uses every core. Output does not depend on it.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Args)]
struct FitRegArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    /// Number of measurement configurations (5..=10)
    #[arg(long, value_parser = clap::value_parser!(u8).range(5..=10))]
    b: u8,
    /// Output θ file; metrics go to `<out>.metrics`
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainAnnArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u8).range(5..=10))]
    b: u8,
    /// Output model; metrics go to `<out>.metrics`, loss history to `<out>.loss.csv`
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 256)]
    batch: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    /// Hidden layer widths, comma separated
    #[arg(long, value_delimiter = ',', default_value = "256,128")]
    hidden: Vec<usize>,
    #[command(flatten)]
    seed: SeedArg,
    /// Require bit-reproducible training (training is always single-threaded, so this only documents intent)
    #[arg(long)]
    deterministic: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Quadratic θ file or network model file
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    test: PathBuf,
    /// Directory for `scatter.csv` and `residuals.csv`
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Metrics files written by fit-reg, train-ann or eval
    #[arg(required = true)]
    files: Vec<PathBuf>,
}

fn parse_seed(s: &str) -> Result<u64, String> {
    let s = s.trim();
    let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => s.parse(),
    };
    parsed.map_err(|e| format!("invalid seed `{s}`: {e}"))
}

enum Model {
    Reg(QuadraticModel),
    Ann(MlpModel),
}

impl Model {
    fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).with_context(|| format!("reading model {}", path.display()))?;
        if bytes.starts_with(MODEL_MAGIC) {
            return Ok(Model::Ann(MlpModel::from_bytes(&bytes).with_context(|| format!("in {}", path.display()))?));
        }
        let text = String::from_utf8(bytes).with_context(|| format!("{} is neither a network nor a θ file", path.display()))?;
        Ok(Model::Reg(QuadraticModel::from_text(&text).with_context(|| format!("in {}", path.display()))?))
    }

    fn b(&self) -> usize {
        match self {
            Model::Reg(m) => m.b(),
            Model::Ann(m) => m.input_dim(),
        }
    }

    fn kind(&self) -> ModelKind {
        match self {
            Model::Reg(_) => ModelKind::Reg,
            Model::Ann(_) => ModelKind::Ann,
        }
    }

    /// Scores use the raw regression output and the un-squared network output.
    fn score(&self, ds: &Dataset) -> Result<Vec<f64>> {
        match self {
            Model::Reg(m) => ds
                .records
                .iter()
                .map(|r| m.predict_raw(&r.p).map_err(Into::into))
                .collect(),
            Model::Ann(m) => Ok(m
                .forward_batch(feature_matrix(&ds.records, m.input_dim()).view())
                .iter()
                .map(|&o| mlp::output_to_negativity(o))
                .collect()),
        }
    }

    fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() < self.b() {
            bail!("expected at least {} features, got {}", self.b(), x.len());
        }
        Ok(match self {
            Model::Reg(m) => m.predict(x)?,
            Model::Ann(m) => m.predict_negativity(&x[..m.input_dim()])?,
        })
    }
}

fn load_dataset(path: &Path) -> Result<Dataset> {
    Ok(Dataset::load(path)?)
}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn emit_metrics(record: &MetricsRecord, out: &Path) -> Result<()> {
    let line = record.to_line();
    write_file(&sidecar(out, ".metrics"), format!("{line}\n"))?;
    println!("{line}");
    Ok(())
}

fn generate(args: GenerateArgs) -> Result<()> {
    let seed = args.seed.get();
    let ds = datasets::generate(args.n, seed, args.threads)?;
    let format = match args.format {
        Format::Csv => DatasetFormat::Csv,
        Format::Bin => DatasetFormat::Binary,
    };
    ds.save(&args.out, format)?;
    let n = negativities(&ds.records);
    println!(
        "count={} seed={seed:#x} zero_fraction={} out={}",
        ds.len(),
        fraction_below(&n, 1e-6),
        args.out.display()
    );
    print!("{}", Histogram::new(n.iter().copied(), 20, 0.0, 1.0).render(40));
    Ok(())
}

fn fit_reg(args: FitRegArgs) -> Result<()> {
    let b = args.b as usize;
    let train = load_dataset(&args.train)?;
    let test = load_dataset(&args.test)?;
    let rows: Vec<[f64; 10]> = train.records.iter().map(|r| r.p).collect();
    let model = QuadraticModel::fit(&rows, &negativities(&train.records), b)?;
    write_file(&args.out, model.to_text())?;
    let model = Model::Reg(model);
    let metrics = Metrics::compute(&negativities(&test.records), &model.score(&test)?)?;
    emit_metrics(&MetricsRecord { kind: ModelKind::Reg, b, metrics }, &args.out)
}

fn train_ann(args: TrainAnnArgs) -> Result<()> {
    let b = args.b as usize;
    let train = load_dataset(&args.train)?;
    let test = load_dataset(&args.test)?;
    let cfg = TrainConfig {
        epochs: args.epochs,
        batch_size: args.batch,
        learning_rate: args.lr,
        seed: args.seed.get(),
        hidden: args.hidden,
        ..TrainConfig::default()
    };
    if args.deterministic {
        eprintln!("deterministic mode: single-threaded training with fixed reduction order");
    }
    let labels = Array1::from(negativities(&train.records)).mapv(|n| n * n);
    let trained = mlp::train(feature_matrix(&train.records, b).view(), labels.view(), &cfg)?;
    trained.model.save(&args.out)?;
    let mut history = String::from("epoch,loss\n");
    for (epoch, loss) in trained.loss_history.iter().enumerate() {
        history.push_str(&format!("{epoch},{loss}\n"));
    }
    write_file(&sidecar(&args.out, ".loss.csv"), history)?;
    let model = Model::Ann(trained.model);
    let metrics = Metrics::compute(&negativities(&test.records), &model.score(&test)?)?;
    emit_metrics(&MetricsRecord { kind: ModelKind::Ann, b, metrics }, &args.out)
}

fn eval(args: EvalArgs) -> Result<()> {
    let model = Model::load(&args.model)?;
    let test = load_dataset(&args.test)?;
    let actual = negativities(&test.records);
    let predicted = model.score(&test)?;
    let metrics = Metrics::compute(&actual, &predicted)?;
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        write_file(&dir.join("scatter.csv"), scatter_csv(&actual, &predicted))?;
        let residuals: Vec<f64> = actual.iter().zip(&predicted).map(|(a, p)| a - p).collect();
        write_file(&dir.join("residuals.csv"), Histogram::symmetric(&residuals, 50).to_csv())?;
    }
    println!("{}", MetricsRecord { kind: model.kind(), b: model.b(), metrics }.to_line());
    Ok(())
}

fn predict(args: PredictArgs) -> Result<()> {
    let model = Model::load(&args.model)?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    for (lineno, line) in io::stdin().lock().lines().enumerate() {
        let line = line.context("reading stdin")?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('p') {
            continue;
        }
        let x = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(str::parse)
            .collect::<Result<Vec<f64>, _>>()
            .with_context(|| format!("stdin line {}", lineno + 1))?;
        let p = model.predict(&x).with_context(|| format!("stdin line {}", lineno + 1))?;
        writeln!(out, "{p}")?;
    }
    Ok(())
}

fn report(args: ReportArgs) -> Result<()> {
    let mut records = Vec::new();
    for path in &args.files {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        for (k, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            records.push(MetricsRecord::parse(line).with_context(|| format!("{}:{}", path.display(), k + 1))?);
        }
    }
    print!("{}", results_table(&records));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::FitReg(a) => fit_reg(a),
        Command::TrainAnn(a) => train_ann(a),
        Command::Eval(a) => eval(a),
        Command::Predict(a) => predict(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
