//! `nsft` command-line frontend.

mod config;

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nsft::io::{read_model, write_model, write_report};
use nsft::metrics::{evaluate, EvalResult};
use nsft::model::NsftModel;
use nsft::synthetic::{generate_ground_truth, sample_observations, SyntheticSpec};
use nsft::tensor::{
    density, parse_wsdream, sniff_dims, split, Dims, EntryIndex, SparseTensor, SplitRatios,
};
use nsft::training::{train, GradientMode, UpdateScheme};
use nsft::ErrorKind;
use serde::Serialize;
use serde_json::json;

use crate::config::{FileConfig, RunConfig, DEFAULT_RATIOS};

#[derive(Debug)]
pub struct CliError {
    kind: ErrorKind,
    message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Config,
            message: message.into(),
        }
    }

    fn data(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Data,
            message: message.into(),
        }
    }

    fn exit_code(&self) -> u8 {
        match self.kind {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Divergence => 4,
        }
    }
}

impl From<nsft::Error> for CliError {
    fn from(e: nsft::Error) -> Self {
        Self {
            kind: e.kind(),
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        Self::data(e.to_string())
    }
}

type CliResult<T = ()> = Result<T, CliError>;

#[derive(Parser)]
#[command(
    name = "nsft",
    version,
    about = "Non-negative snowflake tensor factorization for QoS data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a raw `user service slice value` file and write it normalised.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_parser = parse_dims)]
        dims: Dims,
        /// Normalised tensor output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a split manifest for a tensor file.
    Split {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_parser = parse_dims)]
        dims: Option<Dims>,
        #[arg(long, default_value = DEFAULT_RATIOS)]
        ratios: String,
        #[arg(long, default_value_t = 0)]
        seed_split: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Split, initialise and train a model.
    Train(Box<TrainArgs>),
    /// Compute MAE/RMSE of a model on a tensor or one of its split parts.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Part::All)]
        part: Part,
        #[arg(long, default_value = DEFAULT_RATIOS)]
        ratios: String,
        #[arg(long, default_value_t = 0)]
        seed_split: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Predict `i j k` queries, one per line (stdin when --queries is absent).
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        queries: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample a tensor from a random ground-truth model.
    Synth {
        #[arg(long, value_parser = parse_dims)]
        dims: Dims,
        #[arg(long, default_value_t = 3)]
        rank: usize,
        #[arg(long, default_value_t = 1)]
        arm_width: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.3)]
        density: f64,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, value_parser = parse_pair, default_value = "0.2,1.0")]
        param_range: [f64; 2],
        /// Sampled tensor output.
        #[arg(long)]
        out: PathBuf,
        /// Optional ground-truth model output.
        #[arg(long)]
        model: Option<PathBuf>,
    },
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    input: PathBuf,
    /// TOML file with run settings; its values override flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_dims)]
    dims: Option<Dims>,
    #[arg(long)]
    ratios: Option<String>,
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long)]
    arm_width: Option<usize>,
    #[arg(long)]
    lambda_a: Option<f64>,
    #[arg(long)]
    lambda_b: Option<f64>,
    #[arg(long)]
    lambda_c: Option<f64>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    seed_split: Option<u64>,
    #[arg(long)]
    seed_init: Option<u64>,
    #[arg(long)]
    seed_shuffle: Option<u64>,
    #[arg(long, value_enum)]
    gradient_mode: Option<ModeArg>,
    #[arg(long, value_enum)]
    scheme: Option<SchemeArg>,
    #[arg(long)]
    no_bias: bool,
    #[arg(long, value_parser = parse_pair)]
    init_range: Option<[f64; 2]>,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    report: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Paper,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Batch,
    Stochastic,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Part {
    All,
    Train,
    Valid,
    Test,
}

fn parse_dims(s: &str) -> Result<Dims, String> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [i, j, k] => Dims::new(i, j, k).map_err(|e| e.to_string()),
        _ => Err(format!("expected I,J,K, got `{s}`")),
    }
}

fn parse_pair(s: &str) -> Result<[f64; 2], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [a, b] => Ok([a, b]),
        _ => Err(format!("expected low,high, got `{s}`")),
    }
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

/// Loads a tensor file, taking dims from the flag or the `# dims` header.
fn load_tensor(path: &Path, dims: Option<Dims>) -> CliResult<SparseTensor> {
    let dims = match dims {
        Some(d) => d,
        None => sniff_dims(open(path)?)?.ok_or_else(|| {
            CliError::config(format!(
                "{}: no `# dims` header; pass --dims",
                path.display()
            ))
        })?,
    };
    Ok(parse_wsdream(open(path)?, dims)?.tensor)
}

fn load_model(path: &Path) -> CliResult<NsftModel> {
    Ok(read_model(open(path)?)?)
}

fn print_json(value: &impl Serialize) -> CliResult {
    let line = serde_json::to_string(value).map_err(|e| CliError::data(e.to_string()))?;
    println!("{line}");
    Ok(())
}

fn json_line<W: Write>(out: &mut W, value: &impl Serialize) -> CliResult {
    serde_json::to_writer(&mut *out, value).map_err(|e| CliError::data(e.to_string()))?;
    writeln!(out)?;
    Ok(())
}

fn cmd_ingest(input: &Path, dims: Dims, out: Option<&Path>) -> CliResult {
    let ing = parse_wsdream(open(input)?, dims)?;
    if let Some(path) = out {
        let mut w = create(path)?;
        ing.tensor.write_text(&mut w)?;
        w.flush()?;
    }
    print_json(&json!({
        "records": ing.records,
        "kept": ing.tensor.len(),
        "dropped": ing.dropped,
        "raw_density": ing.raw_density(),
        "density": density(&ing.tensor),
    }))
}

fn cmd_split(input: &Path, dims: Option<Dims>, ratios: &str, seed: u64, out: &Path) -> CliResult {
    let tensor = load_tensor(input, dims)?;
    let parts = split(&tensor, SplitRatios::parse(ratios)?, seed)?;
    let mut w = create(out)?;
    parts.write_manifest(&mut w)?;
    w.flush()?;
    let (a, b, c) = parts.sizes();
    print_json(&json!({ "train": a, "valid": b, "test": c }))
}

fn cmd_train(args: &TrainArgs) -> CliResult {
    let flags = FileConfig {
        dims: args.dims.map(|d| [d.users, d.services, d.slices]),
        ratios: args.ratios.clone(),
        rank: args.rank,
        arm_width: args.arm_width,
        lambda_a: args.lambda_a,
        lambda_b: args.lambda_b,
        lambda_c: args.lambda_c,
        max_epochs: args.max_epochs,
        tol: args.tol,
        seed_split: args.seed_split,
        seed_init: args.seed_init,
        seed_shuffle: args.seed_shuffle,
        gradient_mode: args.gradient_mode.map(|m| match m {
            ModeArg::Paper => GradientMode::Paper,
            ModeArg::Full => GradientMode::Full,
        }),
        scheme: args.scheme.map(|s| match s {
            SchemeArg::Batch => UpdateScheme::Batch,
            SchemeArg::Stochastic => UpdateScheme::Stochastic,
        }),
        use_bias: args.no_bias.then_some(false),
        init_range: args.init_range,
    };
    let file = match &args.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let run = RunConfig::resolve(file.or(flags));
    let dims = run.dims.map(|[i, j, k]| Dims::new(i, j, k)).transpose()?;
    let tensor = load_tensor(&args.input, dims)?;
    let ratios = run.ratios()?;
    let train_cfg = run.train_config();
    train_cfg.validate()?;

    let parts = split(&tensor, ratios, run.seed_split)?;
    let mut model = NsftModel::init(tensor.dims(), &run.model_config(), run.seed_init)?;
    let report = train(&mut model, &parts, &train_cfg)?;
    let test = if parts.test.is_empty() {
        None
    } else {
        Some(evaluate(&model, &parts.test)?)
    };

    let mut w = create(&args.model)?;
    write_model(&model, &mut w)?;
    w.flush()?;

    let (a, b, c) = parts.sizes();
    let d = tensor.dims();
    let mut w = create(&args.report)?;
    json_line(
        &mut w,
        &json!({
            "record": "header",
            "dims": [d.users, d.services, d.slices],
            "entries": tensor.len(),
            "split": { "train": a, "valid": b, "test": c },
            "config": run,
        }),
    )?;
    write_report(&report, &mut w)?;
    if let Some(t) = test {
        json_line(
            &mut w,
            &json!({ "record": "test", "mae": t.mae, "rmse": t.rmse, "count": t.count }),
        )?;
    }
    w.flush()?;

    let last = report.last().expect("at least one epoch");
    print_json(&json!({
        "epochs": report.epochs.len(),
        "stop_reason": report.stop_reason,
        "valid_rmse": last.valid_rmse,
        "test_mae": test.map(|t| t.mae),
        "test_rmse": test.map(|t| t.rmse),
    }))
}

fn cmd_evaluate(
    model: &Path,
    input: &Path,
    part: Part,
    ratios: &str,
    seed: u64,
    out: Option<&Path>,
) -> CliResult {
    let model = load_model(model)?;
    let tensor = load_tensor(input, Some(model.dims()))?;
    let set = match part {
        Part::All => tensor,
        _ => {
            let parts = split(&tensor, SplitRatios::parse(ratios)?, seed)?;
            match part {
                Part::Train => parts.train,
                Part::Valid => parts.valid,
                _ => parts.test,
            }
        }
    };
    let EvalResult { mae, rmse, count } = evaluate(&model, &set)?;
    let record = json!({ "part": part, "mae": mae, "rmse": rmse, "count": count });
    if let Some(path) = out {
        let mut w = create(path)?;
        json_line(&mut w, &record)?;
        w.flush()?;
    }
    print_json(&record)
}

fn cmd_predict(model: &Path, queries: Option<&Path>, out: Option<&Path>) -> CliResult {
    let model = load_model(model)?;
    let reader: Box<dyn BufRead> = match queries {
        Some(p) => Box::new(open(p)?),
        None => Box::new(BufReader::new(io::stdin())),
    };
    let mut writer: Box<dyn Write> = match out {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout())),
    };
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = t.split_whitespace().collect();
        let idx = match f[..] {
            [i, j, k] => {
                let p = |s: &str| {
                    s.parse::<u32>()
                        .map_err(|e| CliError::data(format!("line {}: `{s}`: {e}", n + 1)))
                };
                EntryIndex::new(p(i)?, p(j)?, p(k)?)
            }
            _ => return Err(CliError::data(format!("line {}: expected `i j k`", n + 1))),
        };
        let y = model.predict(idx)?;
        writeln!(writer, "{} {} {} {}", idx.i, idx.j, idx.k, y)?;
    }
    writer.flush()?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_synth(
    dims: Dims,
    rank: usize,
    arm_width: usize,
    seed: u64,
    density_target: f64,
    noise: f64,
    range: [f64; 2],
    out: &Path,
    model_out: Option<&Path>,
) -> CliResult {
    let spec = SyntheticSpec {
        density: density_target,
        noise_sigma: noise,
        low: range[0],
        high: range[1],
        ..SyntheticSpec::new(dims, rank, arm_width, seed)
    };
    let truth = generate_ground_truth(&spec).map_err(|e| CliError::config(e.to_string()))?;
    let tensor = sample_observations(&truth, &spec)?;
    let mut w = create(out)?;
    tensor.write_text(&mut w)?;
    w.flush()?;
    if let Some(path) = model_out {
        let mut w = create(path)?;
        write_model(&truth, &mut w)?;
        w.flush()?;
    }
    print_json(&json!({ "entries": tensor.len(), "density": density(&tensor) }))
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Ingest { input, dims, out } => cmd_ingest(&input, dims, out.as_deref()),
        Command::Split {
            input,
            dims,
            ratios,
            seed_split,
            out,
        } => cmd_split(&input, dims, &ratios, seed_split, &out),
        Command::Train(args) => cmd_train(&args),
        Command::Evaluate {
            model,
            input,
            part,
            ratios,
            seed_split,
            out,
        } => cmd_evaluate(&model, &input, part, &ratios, seed_split, out.as_deref()),
        Command::Predict {
            model,
            queries,
            out,
        } => cmd_predict(&model, queries.as_deref(), out.as_deref()),
        Command::Synth {
            dims,
            rank,
            arm_width,
            seed,
            density,
            noise,
            param_range,
            out,
            model,
        } => cmd_synth(
            dims,
            rank,
            arm_width,
            seed,
            density,
            noise,
            param_range,
            &out,
            model.as_deref(),
        ),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.exit_code())
        }
    }
}
