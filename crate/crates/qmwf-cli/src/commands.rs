use clap::{Args, Parser, Subcommand, ValueEnum};
use qmwf_core::checkpoint::{load_checkpoint, save_checkpoint};
use qmwf_core::data::{filter_no_positive, load_tsv, negative_sample, Dataset};
use qmwf_core::embedding::{load_embeddings, tokenize, CharConv, CharInput, Encoder};
use qmwf_core::error::Error;
use qmwf_core::eval::MetricReport;
use qmwf_core::network::{forward, QmwfConfig, QmwfModel};
use qmwf_core::tensor::{cp_als, DenseTensor};
use qmwf_core::training::{score_dataset, train, HyperParams};
use qmwf_core::verify::run_verification;
use serde_json::json;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Runtime(String),
    Verification,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(m) => CliError::Validation(m),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

type CliResult = Result<(), CliError>;

#[derive(Parser, Debug)]
#[command(
    name = "qmwf",
    version,
    about = "Tensor-projection sentence model with a QA ranking harness"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Run the self-generating property suite (no external files needed)
    Verify(VerifyArgs),
    /// Train a model on TSV splits and keep the best-dev checkpoint
    Train(TrainArgs),
    /// Score a split with a checkpoint and print MAP / MRR / P@1
    Eval(EvalArgs),
    /// Export one representation vector per input sentence
    Repr(ReprArgs),
    /// Fit CP factors to a dense tensor file and report the fit error
    Decompose(DecomposeArgs),
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Perturb one kernel by this amount so the identity check must fail;
    /// self-test of the harness
    #[arg(long)]
    inject_fault: Option<f64>,
    /// Where to write the failing instance, if any (default
    /// qmwf-verify-failure.json)
    #[arg(long)]
    replay_out: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum InputMode {
    Word,
    Char,
}

#[derive(Args, Debug)]
struct ModelFlags {
    /// Convolution channels (the decomposition rank R)
    #[arg(long, default_value_t = 150)]
    channels: usize,
    /// Words per convolution window (1-3)
    #[arg(long, default_value_t = 1)]
    patch_size: usize,
    /// One kernel per channel shared across positions
    #[arg(long)]
    shared_kernels: bool,
    /// Sum logs of absolute responses instead of multiplying them
    #[arg(long)]
    log_pool: bool,
    /// Embedding dimension (word mode: must match the embeddings file)
    #[arg(long, default_value_t = 300)]
    embed_dim: usize,
    /// Longest supported sentence, in words
    #[arg(long, default_value_t = 40)]
    max_positions: usize,
    #[arg(long, value_enum, default_value_t = InputMode::Word)]
    input_mode: InputMode,
    /// Char mode: file whose distinct characters form the alphabet
    #[arg(long)]
    charset: Option<PathBuf>,
    /// Char mode: characters per convolution window
    #[arg(long, default_value_t = 3)]
    char_window: usize,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Training split (TSV: qid, question, answer, label)
    #[arg(long)]
    train: PathBuf,
    /// Dev split used for model selection
    #[arg(long)]
    dev: PathBuf,
    /// Word-embedding text file (word mode)
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Output checkpoint path
    #[arg(long)]
    checkpoint: PathBuf,
    /// History file (default: <checkpoint>.history.jsonl)
    #[arg(long)]
    history: Option<PathBuf>,
    /// TOML config with HyperParams keys; flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    margin: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Replace each group's negatives with this many sampled from other
    /// questions (0 keeps the labeled negatives)
    #[arg(long, default_value_t = 0)]
    neg_k: usize,
    /// Do not fine-tune the embedding rows
    #[arg(long)]
    freeze_embeddings: bool,
    #[command(flatten)]
    model: ModelFlags,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Split to score
    #[arg(long)]
    test: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Needed only when the checkpoint carries no encoder
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Replace negatives by sampling, as in training (0 = keep)
    #[arg(long, default_value_t = 0)]
    neg_k: usize,
    /// Split name used in the report
    #[arg(long, default_value = "test")]
    split: String,
}

#[derive(Args, Debug)]
struct ReprArgs {
    /// Text file with one sentence per line
    input: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Needed only when the checkpoint carries no encoder
    #[arg(long)]
    embeddings: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DecomposeArgs {
    /// Tensor file: JSON {"order": N, "dim": M, "data": [...]}
    input: PathBuf,
    #[arg(long)]
    rank: usize,
    #[arg(long, default_value_t = 500)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Write the fitted factors as JSON
    #[arg(long)]
    output: Option<PathBuf>,
}

pub fn dispatch(cli: Cli) -> CliResult {
    match cli.command {
        Command::Verify(args) => cmd_verify(args),
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Repr(args) => cmd_repr(args),
        Command::Decompose(args) => cmd_decompose(args),
    }
}

fn cmd_verify(args: VerifyArgs) -> CliResult {
    let report = run_verification(args.seed, args.inject_fault);
    println!("verification suite (seed {})", report.seed);
    for check in &report.checks {
        let status = if check.passed { "PASS" } else { "FAIL" };
        println!(
            "[{status}] {:<42} max error {:>12.3e}  ({})",
            check.name, check.max_error, check.detail
        );
    }
    if report.all_passed() {
        println!("all checks passed");
        Ok(())
    } else {
        for check in &report.checks {
            if let Some(replay) = &check.replay {
                let path = args
                    .replay_out
                    .clone()
                    .unwrap_or_else(|| PathBuf::from("qmwf-verify-failure.json"));
                fs::write(&path, serde_json::to_string_pretty(replay).unwrap())
                    .map_err(|e| CliError::Runtime(format!("writing {}: {e}", path.display())))?;
                eprintln!("failing instance written to {}", path.display());
                break;
            }
        }
        Err(CliError::Verification)
    }
}

fn build_config(flags: &ModelFlags, embed_dim: usize) -> QmwfConfig {
    QmwfConfig {
        embed_dim,
        channels: flags.channels,
        patch_size: flags.patch_size,
        shared_kernels: flags.shared_kernels,
        log_domain: flags.log_pool,
        epsilon: 1e-6,
        max_positions: flags.max_positions,
    }
}

/// Built-in alphabet used when char mode is selected without --charset.
const DEFAULT_ALPHABET: &str = "abcdefghijklmnopqrstuvwxyz0123456789 ,;.!?:'\"/\\|_@#$%^&*~`+-=<>()[]{}";

fn build_encoder(flags: &ModelFlags, embeddings: Option<&Path>, seed: u64) -> Result<Encoder, CliError> {
    match flags.input_mode {
        InputMode::Word => {
            let path = embeddings.ok_or_else(|| {
                CliError::Validation("word input mode requires --embeddings".into())
            })?;
            let (table, report) = load_embeddings(path, flags.embed_dim)?;
            eprintln!(
                "diag {}",
                json!({"event": "embeddings-loaded", "loaded": report.loaded,
                       "skipped": report.skipped, "duplicates": report.duplicates})
            );
            Ok(Encoder::Word {
                table,
                max_positions: flags.max_positions,
            })
        }
        InputMode::Char => {
            let input = match &flags.charset {
                Some(path) => CharInput::from_charset_file(path, flags.char_window)?,
                None => CharInput::one_hot(DEFAULT_ALPHABET, flags.char_window)?,
            };
            let conv = CharConv::init(&input, flags.embed_dim, seed)?;
            Ok(Encoder::Char {
                input,
                conv,
                max_positions: flags.max_positions,
            })
        }
    }
}

fn load_split(path: &Path, split: &str, neg_k: usize, seed: u64) -> Result<Dataset, CliError> {
    let (dataset, report) = load_tsv(path, split)?;
    eprintln!(
        "diag {}",
        json!({"event": "split-loaded", "split": split, "groups": dataset.num_groups(),
               "pairs": dataset.num_pairs(), "malformed": report.malformed,
               "dropped_empty": report.dropped_empty, "deduplicated": report.deduplicated})
    );
    let (dataset, removed) = filter_no_positive(dataset);
    if removed > 0 {
        eprintln!(
            "diag {}",
            json!({"event": "groups-without-positive-removed", "split": split, "removed": removed})
        );
    }
    let dataset = if neg_k > 0 {
        negative_sample(dataset, neg_k, seed)?
    } else {
        dataset
    };
    Ok(dataset)
}

fn cmd_train(args: TrainArgs) -> CliResult {
    let mut hp = match &args.config {
        Some(path) => {
            let body = fs::read_to_string(path)
                .map_err(|e| CliError::Validation(format!("--config {}: {e}", path.display())))?;
            HyperParams::from_toml_str(&body)?
        }
        None => HyperParams::default(),
    };
    if let Some(lr) = args.lr {
        hp.learning_rate = lr;
    }
    if let Some(batch) = args.batch {
        hp.batch_size = batch;
    }
    if let Some(l2) = args.l2 {
        hp.l2_lambda = l2;
    }
    if let Some(epochs) = args.epochs {
        hp.epochs = epochs;
    }
    if let Some(margin) = args.margin {
        hp.margin = margin;
    }
    if let Some(seed) = args.seed {
        hp.seed = seed;
    }
    hp.validate().map_err(|e| CliError::Validation(e.to_string()))?;

    let mut encoder = build_encoder(&args.model, args.embeddings.as_deref(), hp.seed)?;
    if args.freeze_embeddings {
        if let Encoder::Word { table, .. } = &mut encoder {
            table.trainable = false;
        }
    }
    let embed_dim = encoder.dim();
    let config = build_config(&args.model, embed_dim);
    config.validate().map_err(|e| CliError::Validation(e.to_string()))?;

    let train_set = load_split(&args.train, "train", args.neg_k, hp.seed)?;
    let dev_set = load_split(&args.dev, "dev", args.neg_k, hp.seed.wrapping_add(1))?;

    let model = QmwfModel::init(config, hp.seed)?;
    let outcome = train(&train_set, &dev_set, model, encoder, &hp)?;

    let history_path = args
        .history
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.history.jsonl", args.checkpoint.display())));
    let mut history_file = fs::File::create(&history_path)
        .map_err(|e| CliError::Runtime(format!("writing {}: {e}", history_path.display())))?;
    for record in &outcome.history {
        let line = serde_json::to_string(record).unwrap();
        println!("{line}");
        writeln!(history_file, "{line}")
            .map_err(|e| CliError::Runtime(format!("writing {}: {e}", history_path.display())))?;
    }

    save_checkpoint(&args.checkpoint, &outcome.model, Some(&outcome.encoder))?;
    eprintln!(
        "diag {}",
        json!({"event": "train-finished", "best_epoch": outcome.best_epoch,
               "best_dev_map": outcome.best_dev_map,
               "skipped_questions": outcome.skipped_questions,
               "checkpoint": args.checkpoint.display().to_string(),
               "history": history_path.display().to_string()})
    );
    Ok(())
}

fn resolve_encoder(
    checkpoint_encoder: Option<Encoder>,
    embeddings: Option<&Path>,
    model: &QmwfModel,
) -> Result<Encoder, CliError> {
    if let Some(encoder) = checkpoint_encoder {
        return Ok(encoder);
    }
    let path = embeddings.ok_or_else(|| {
        CliError::Validation(
            "checkpoint carries no encoder; pass --embeddings for word mode".into(),
        )
    })?;
    let (table, _) = load_embeddings(path, model.config.embed_dim)?;
    Ok(Encoder::Word {
        table,
        max_positions: model.config.max_positions,
    })
}

fn cmd_eval(args: EvalArgs) -> CliResult {
    let (model, encoder) = load_checkpoint(&args.checkpoint)?;
    let encoder = resolve_encoder(encoder, args.embeddings.as_deref(), &model)?;
    let dataset = load_split(&args.test, &args.split, args.neg_k, args.seed)?;
    let (groups, skipped) = score_dataset(&dataset, &model, &encoder)?;
    if skipped > 0 {
        eprintln!(
            "diag {}",
            json!({"event": "groups-skipped-at-eval", "skipped": skipped})
        );
    }
    if groups.is_empty() {
        return Err(CliError::Runtime("no scorable question groups".into()));
    }
    let report = MetricReport::compute(&args.split, args.seed, &groups)?;
    println!("{report}");
    for record in report.records() {
        println!("{}", serde_json::to_string(&record).unwrap());
    }
    Ok(())
}

fn cmd_repr(args: ReprArgs) -> CliResult {
    let (model, encoder) = load_checkpoint(&args.checkpoint)?;
    let encoder = resolve_encoder(encoder, args.embeddings.as_deref(), &model)?;
    let body = fs::read_to_string(&args.input)
        .map_err(|e| CliError::Runtime(format!("reading {}: {e}", args.input.display())))?;
    let mut emitted = 0usize;
    for line in body.lines() {
        if tokenize(line).is_empty() {
            continue;
        }
        let enc = encoder.encode(line)?;
        let repr = forward(&enc.matrix, &model)?;
        let fields: Vec<String> = repr.values.iter().map(|v| format!("{v}")).collect();
        println!("{}", fields.join(" "));
        emitted += 1;
    }
    if emitted == 0 {
        return Err(CliError::Runtime(format!(
            "{}: no non-empty sentences",
            args.input.display()
        )));
    }
    Ok(())
}

fn cmd_decompose(args: DecomposeArgs) -> CliResult {
    if args.rank == 0 {
        return Err(CliError::Validation("--rank must be at least 1".into()));
    }
    let body = fs::read_to_string(&args.input)
        .map_err(|e| CliError::Runtime(format!("reading {}: {e}", args.input.display())))?;
    let parsed: serde_json::Value = serde_json::from_str(&body)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", args.input.display())))?;
    let order = parsed["order"]
        .as_u64()
        .ok_or_else(|| CliError::Runtime("tensor file: missing integer 'order'".into()))?
        as usize;
    let dim = parsed["dim"]
        .as_u64()
        .ok_or_else(|| CliError::Runtime("tensor file: missing integer 'dim'".into()))?
        as usize;
    let data: Vec<f64> = parsed["data"]
        .as_array()
        .ok_or_else(|| CliError::Runtime("tensor file: missing array 'data'".into()))?
        .iter()
        .map(|v| {
            v.as_f64()
                .ok_or_else(|| CliError::Runtime("tensor file: non-numeric data entry".into()))
        })
        .collect::<Result<_, _>>()?;
    let tensor = DenseTensor::new(order, dim, data)?;

    let fit = cp_als(&tensor, args.rank, args.max_iters, args.tol, args.seed)?;
    println!(
        "rank {} fit: relative error {:.6e} after {} sweeps{}",
        args.rank,
        fit.relative_error,
        fit.iterations,
        if fit.regularized {
            " (ridge-regularized solves)"
        } else {
            ""
        }
    );

    if let Some(out) = &args.output {
        let factors = &fit.factors;
        let payload = json!({
            "rank": factors.rank(),
            "order": factors.order(),
            "dim": factors.dim(),
            "weights": factors.weights(),
            "factors": (0..factors.rank())
                .map(|r| (0..factors.order()).map(|i| factors.factor(r, i).to_vec()).collect::<Vec<_>>())
                .collect::<Vec<_>>(),
            "relative_error": fit.relative_error,
            "iterations": fit.iterations,
            "regularized": fit.regularized,
        });
        fs::write(out, serde_json::to_string_pretty(&payload).unwrap())
            .map_err(|e| CliError::Runtime(format!("writing {}: {e}", out.display())))?;
    }
    Ok(())
}
